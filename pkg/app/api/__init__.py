"""Mock chat-completions server routes."""
