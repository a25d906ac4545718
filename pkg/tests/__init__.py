# Tests for the consensus simulator
