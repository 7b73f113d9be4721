#include <catch2/catch_amalgamated.hpp>

#include "bitour/cli.hpp"

using namespace bitour;

TEST_CASE("blow-up cycle counts") {
    Digraph d = make_blowup_cycle(4, 2);
    REQUIRE(d.order() == 8);
    REQUIRE(d.size() == 16);
    REQUIRE(is_regular(d) == 2);
}
