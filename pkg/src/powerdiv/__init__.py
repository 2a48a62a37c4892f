"""Power divergence statistics and their chi-square approximation bounds."""
