#include <catch2/catch_amalgamated.hpp>

#include "agp/lineage.hpp"

using namespace agp;

namespace {

RegistrationRecord prompt_record(const std::string& name, const std::string& text,
                                 const std::string& version = "0.1.0") {
    RegistrationRecord r;
    r.entity.name = name;
    r.entity.mapping = {{"prompt_text", text}};
    r.version = *Version::parse(version);
    return r;
}

}  // namespace

TEST_CASE("append grows history and keeps hashes stable") {
    LineageStore store;
    auto r0 = prompt_record("p", "v0");
    auto s0 = store.append("p", r0, std::nullopt);
    auto r1 = prompt_record("p", "v1", "0.1.1");
    store.append("p", r1, s0.version);
    CHECK(store.length("p") == 2);

    const auto back = store.get("p", *Version::parse("0.1.0"));
    CHECK(back.content_hash == record_content_hash(r0));
    CHECK(back.record == r0);
}

TEST_CASE("non-monotonic appends are rejected") {
    LineageStore store;
    store.append("p", prompt_record("p", "x", "0.1.1"), std::nullopt);
    try {
        store.append("p", prompt_record("p", "y", "0.1.0"), *Version::parse("0.1.1"));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonMonotonicVersion);
    }
}

TEST_CASE("history is chronological and chained") {
    LineageStore store;
    std::optional<Version> parent;
    for (int i = 0; i < 3; ++i) {
        auto rec = prompt_record("p", "t" + std::to_string(i), "0.1." + std::to_string(i));
        store.append("p", rec, parent);
        parent = rec.version;
    }
    const auto h = store.history("p");
    REQUIRE(h.size() == 3);
    CHECK(h[0].version.str() == "0.1.0");
    CHECK(h[2].version.str() == "0.1.2");
    CHECK_FALSE(h[0].parent.has_value());
    CHECK(h[1].parent == h[0].version);
    CHECK(h[2].parent == h[1].version);
}

TEST_CASE("history of unknown names raises NotFound") {
    LineageStore store;
    CHECK_THROWS_AS(store.history("nope"), Error);
}

TEST_CASE("diff is reflexive, precise and antisymmetric") {
    LineageStore store;
    auto r0 = prompt_record("p", "original");
    store.append("p", r0, std::nullopt);
    auto r1 = prompt_record("p", "edited", "0.1.1");
    store.append("p", r1, r0.version);

    CHECK(store.diff("p", r0.version, r0.version).empty());

    const auto forward = store.diff("p", r0.version, r1.version);
    REQUIRE(forward.size() == 1);
    CHECK(forward[0].field == "entity.mapping.prompt_text");
    CHECK(forward[0].old_value == json("original"));
    CHECK(forward[0].new_value == json("edited"));

    const auto backward = store.diff("p", r1.version, r0.version);
    REQUIRE(backward.size() == 1);
    CHECK(backward[0].old_value == forward[0].new_value);
    CHECK(backward[0].new_value == forward[0].old_value);
}

TEST_CASE("diff of unknown versions raises VersionNotFound") {
    LineageStore store;
    store.append("p", prompt_record("p", "x"), std::nullopt);
    try {
        store.diff("p", *Version::parse("0.1.0"), *Version::parse("9.9.9"));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::VersionNotFound);
    }
}
