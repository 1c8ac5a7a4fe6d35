# LLM client package
