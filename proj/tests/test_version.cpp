#include <catch2/catch_amalgamated.hpp>

#include "agp/version.hpp"

using namespace agp;

TEST_CASE("next_version defaults and increments") {
    CHECK(next_version(std::nullopt).str() == "0.1.0");
    CHECK(next_version(Version::parse("0.1.0")).str() == "0.1.1");
    CHECK(next_version(Version::parse("2.3.9")).str() == "2.3.10");
}

TEST_CASE("version parse/render roundtrip") {
    for (const char* s : {"0.1.0", "1.0.0", "10.20.30", "0.0.0"}) {
        auto v = Version::parse(s);
        REQUIRE(v);
        CHECK(v->str() == s);
    }
}

TEST_CASE("version grammar rejects malformed strings") {
    for (const char* s : {"", "1", "1.2", "1.2.3.4", "a.b.c", "1.2.x", "-1.2.3", "1..3",
                          "1.2.3 ", "v1.2.3"}) {
        CHECK_FALSE(Version::parse(s).has_value());
    }
}

TEST_CASE("version ordering is lexicographic on the triple") {
    CHECK(*Version::parse("0.1.9") < *Version::parse("0.2.0"));
    CHECK(*Version::parse("0.2.0") < *Version::parse("1.0.0"));
    CHECK(*Version::parse("1.2.3") == *Version::parse("1.2.3"));
    CHECK(*Version::parse("1.2.3") < *Version::parse("1.2.10"));
}
