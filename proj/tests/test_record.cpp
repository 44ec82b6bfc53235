#include <catch2/catch_amalgamated.hpp>

#include "agp/record.hpp"

using namespace agp;

namespace {

RegistrationRecord sample_prompt() {
    RegistrationRecord r;
    r.entity.name = "solver";
    r.entity.description = "a prompt";
    r.entity.mapping = {{"prompt_text", "answer {question}"}};
    r.entity.trainable = true;
    r.entity.metadata = {{"owner", "tests"}};
    r.impl_descriptor = "builtin:prompt";
    r.init_params = {{"lang", "en"}};
    r.exports.push_back({ExportForm::NaturalLanguageText, "answers questions"});
    return r;
}

}  // namespace

TEST_CASE("record json codec roundtrips") {
    const RegistrationRecord r = sample_prompt();
    const RegistrationRecord back = record_from_json(record_to_json(r));
    CHECK(back == r);
}

TEST_CASE("canonical encoding is deterministic") {
    const RegistrationRecord r = sample_prompt();
    CHECK(canonical_encode(r) == canonical_encode(r));
    const RegistrationRecord back = record_from_json(json::parse(canonical_encode(r)));
    CHECK(canonical_encode(back) == canonical_encode(r));
}

TEST_CASE("content hash ignores the version field") {
    RegistrationRecord a = sample_prompt();
    RegistrationRecord b = a;
    b.version = Version{0, 1, 7};
    CHECK(record_content_hash(a) == record_content_hash(b));
    b.entity.mapping["prompt_text"] = "changed";
    CHECK(record_content_hash(a) != record_content_hash(b));
}

TEST_CASE("validation enforces kind-specific mapping shape") {
    RegistrationRecord r = sample_prompt();
    CHECK_NOTHROW(validate_record(EntityKind::Prompt, r));

    RegistrationRecord empty_name = r;
    empty_name.entity.name = "";
    CHECK_THROWS_AS(validate_record(EntityKind::Prompt, empty_name), Error);

    // a prompt mapping is not a tool mapping
    CHECK_THROWS_AS(validate_record(EntityKind::Tool, r), Error);

    RegistrationRecord tool;
    tool.entity.name = "adder";
    tool.entity.mapping = {{"source", "a + b"}};
    CHECK_NOTHROW(validate_record(EntityKind::Tool, tool));

    RegistrationRecord agent;
    agent.entity.name = "runner";
    agent.entity.mapping = {{"prompt", "solver"}, {"model", "m"}};
    CHECK_NOTHROW(validate_record(EntityKind::Agent, agent));
    agent.entity.mapping.erase("model");
    CHECK_THROWS_AS(validate_record(EntityKind::Agent, agent), Error);
}

TEST_CASE("record parse errors carry ParseError kind") {
    try {
        record_from_json(json::parse(R"({"description": "missing name"})"));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
    }
    try {
        record_from_json(json::parse(R"({"name": "x", "version": "not-semver"})"));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
    }
}

TEST_CASE("flatten produces logical field paths") {
    const auto flat = flatten_record(sample_prompt());
    CHECK(flat.count("entity.name"));
    CHECK(flat.count("entity.mapping.prompt_text"));
    CHECK(flat.count("entity.metadata.owner"));
    CHECK(flat.count("init_params.lang"));
    CHECK(flat.count("exports[0].body"));
}
