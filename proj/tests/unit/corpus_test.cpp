#include "test_support.hpp"

#include <trace_profiler/corpus.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace trace_profiler;

namespace {

Corpus parse(const std::string& text, Schema schema = Schema::Structured) {
    std::istringstream in(text);
    return parse_corpus(in, schema, "t");
}

ErrorCode code_of(const std::string& text, Schema schema = Schema::Structured) {
    try {
        parse(text, schema);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error for: " << text;
    return ErrorCode::Precondition;
}

const char* kRecord =
    R"({"id":"a","domain":"math","query":"2+2?","reasoning":"2+2=4.","answer":"4","meta":{"src":"x"}})";

}  // namespace

TEST(Corpus, ParsesStructuredRecords) {
    const auto c = parse(std::string(kRecord) + "\n\n" +
                         R"({"id":"b","domain":"code","query":"q","reasoning":"r","answer":"a"})" + "\n");
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c.examples[0].id, "a");
    EXPECT_EQ(c.examples[0].domain, Domain::Math);
    EXPECT_EQ(c.examples[0].reasoning, "2+2=4.");
    EXPECT_EQ(c.examples[0].meta.at("src"), "x");
    EXPECT_EQ(c.examples[1].domain, Domain::Code);
}

TEST(Corpus, StructuredErrors) {
    EXPECT_EQ(code_of(R"({"id":"a","domain":"math","query":"q","answer":"a"})"), ErrorCode::MissingField);
    EXPECT_EQ(code_of(R"({"id":"a","domain":"math","query":"q","reasoning":1,"answer":"a"})"),
              ErrorCode::MissingField);
    EXPECT_EQ(code_of(R"({"id":"a","domain":"poetry","query":"q","reasoning":"r","answer":"a"})"),
              ErrorCode::ParseError);
    EXPECT_EQ(code_of("{not json}\n"), ErrorCode::ParseError);
    EXPECT_EQ(code_of("[1,2]\n"), ErrorCode::ParseError);
    EXPECT_EQ(code_of(std::string(kRecord) + "\n" + kRecord + "\n"), ErrorCode::DuplicateId);
    EXPECT_EQ(code_of("\n  \n"), ErrorCode::EmptyCorpus);
}

TEST(Corpus, ErrorMessagesCarryLineNumbers) {
    try {
        parse(std::string(kRecord) + "\n" + R"({"id":"b","domain":"math"})" + "\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(Corpus, SplitReasoning) {
    auto s = split_reasoning("  <think>step one. step two.</think>  The answer is 4.");
    EXPECT_EQ(s.reasoning, "step one. step two.");
    EXPECT_EQ(s.answer, "The answer is 4.");

    auto empty_answer = split_reasoning("<think>r</think>");
    EXPECT_EQ(empty_answer.answer, "");

    auto code = [](std::string_view t) {
        try {
            split_reasoning(t);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Precondition;
    };
    EXPECT_EQ(code("just an answer"), ErrorCode::NoThinkSpan);
    EXPECT_EQ(code("<think>a</think><think>b</think>"), ErrorCode::UnbalancedTags);
    EXPECT_EQ(code("<think>a"), ErrorCode::UnbalancedTags);
    EXPECT_EQ(code("</think>a<think>"), ErrorCode::UnbalancedTags);
    EXPECT_EQ(code("Sure! <think>a</think>b"), ErrorCode::ContentBeforeThink);
}

TEST(Corpus, ParsesChatSchema) {
    const auto c = parse(
        R"({"id":"c1","domain":"science","messages":[{"role":"system","content":"s"},{"role":"user","content":"Why?"},{"role":"assistant","content":"<think>Because.</think>Yes."}]})"
        "\n",
        Schema::Chat);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c.examples[0].query, "Why?");
    EXPECT_EQ(c.examples[0].reasoning, "Because.");
    EXPECT_EQ(c.examples[0].answer, "Yes.");

    EXPECT_EQ(code_of(R"({"id":"c","domain":"math","messages":[{"role":"user","content":"q"}]})", Schema::Chat),
              ErrorCode::MissingField);
    EXPECT_EQ(code_of(R"({"id":"c","domain":"math"})", Schema::Chat), ErrorCode::MissingField);
    EXPECT_EQ(code_of(R"({"id":"c","domain":"math","messages":[{"role":"user","content":"q"},)"
                      R"({"role":"assistant","content":"no tags"}]})",
                      Schema::Chat),
              ErrorCode::NoThinkSpan);
}

TEST(Corpus, SerializeRoundTrip) {
    const auto c = parse(std::string(kRecord) + "\n");
    const auto text = serialize_corpus(c);
    EXPECT_EQ(text.back(), '\n');
    const auto again = parse(text);
    EXPECT_EQ(serialize_corpus(again), text);
}

TEST(Corpus, WhitespaceTokenizer) {
    WhitespaceTokenizer t;
    EXPECT_EQ(t.count(""), 0u);
    EXPECT_EQ(t.count("   "), 0u);
    EXPECT_EQ(t.count("one two  three\n four"), 4u);
    EXPECT_EQ(t.count("zażółć gęślą jaźń"), 3u);
}

TEST(Corpus, StatsAndLengthFilter) {
    const auto c = parse(
        R"({"id":"a","domain":"math","query":"q q","reasoning":"r r r","answer":"a"})"
        "\n"
        R"({"id":"b","domain":"code","query":"q","reasoning":"r","answer":"a"})"
        "\n");
    WhitespaceTokenizer t;
    const auto s = compute_stats(c, t);
    EXPECT_DOUBLE_EQ(s.avg_reasoning_tokens, 2.0);
    EXPECT_DOUBLE_EQ(s.avg_reasoning_chars, 3.0);
    EXPECT_DOUBLE_EQ(s.avg_total_tokens, 4.5);
    EXPECT_EQ(s.domain_histogram.at(Domain::Math), 1u);
    EXPECT_EQ(s.domain_histogram.at(Domain::Science), 0u);

    const auto f = filter_by_length(c, t, 5);
    ASSERT_EQ(f.corpus.size(), 1u);
    EXPECT_EQ(f.corpus.examples[0].id, "b");
    ASSERT_EQ(f.removed.size(), 1u);
    EXPECT_EQ(f.removed[0], "a");
    EXPECT_THROW(filter_by_length(c, t, 2), Error);
}

TEST(Corpus, LoadsBundledSyntheticCorpora) {
    for (const char* name : {"babythink", "detailed", "lengthy", "summarized"}) {
        const auto c = load_corpus(tp_test::source_path(std::string("data/synthetic/") + name + ".jsonl"),
                                   Schema::Structured);
        EXPECT_EQ(c.size(), 20u) << name;
        EXPECT_EQ(c.name, name);
    }
}
