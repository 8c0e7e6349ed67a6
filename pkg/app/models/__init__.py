"""Domain values, enums and schemas."""
