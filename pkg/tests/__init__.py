# Tests for the Bell state analyzer simulator
