"""Portfolio optimization under first-order stochastic dominance constraints."""
