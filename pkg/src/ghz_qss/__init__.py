"""GHZ-based quantum secret sharing: simulator, witness check and attacks."""
