# Tests for DailyTrending.info pipeline
