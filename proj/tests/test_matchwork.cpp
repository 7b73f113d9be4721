#include <catch2/catch_amalgamated.hpp>
#include "bitour/cli.hpp"
