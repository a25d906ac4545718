"""Conversational agent backend: prompts, reply parsing, sessions and the endpoint client."""
