"""Text frontend: the .rspec language, directive runner and CLI."""
