"""Integration tests for Trees API endpoints."""

from fastapi.testclient import TestClient
from httpx import AsyncClient


class TestTreesAPI:
    """Test suite for Trees API endpoints."""

    def test_list_trees(self, client: TestClient) -> None:
        """Test the default listing through order five."""
        response = client.get("/trees")

        assert response.status_code == 200
        data = response.json()
        assert len(data) == 17
        assert data[0] == {"tree": "[]", "order": 1, "slca": True, "zeta": "1"}

    def test_slca_only(self, client: TestClient) -> None:
        """Test the semi-lone-child-avoiding filter."""
        response = client.get("/trees?slca_only=true")

        assert response.status_code == 200
        data = response.json()
        assert len(data) == 9
        assert all(row["slca"] for row in data)

    def test_max_order_validation(self, client: TestClient) -> None:
        """Test that order zero is rejected."""
        response = client.get("/trees?max_order=0")

        assert response.status_code == 422

    async def test_list_trees_async(self, async_client: AsyncClient) -> None:
        """Test the listing through the async client."""
        response = await async_client.get("/trees", params={"max_order": 4})

        assert response.status_code == 200
        assert len(response.json()) == 8
