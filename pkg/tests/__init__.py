# cyclevc test suite
