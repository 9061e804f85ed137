"""Demo applications and the benchmark harness."""
