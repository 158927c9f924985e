#include <gtest/gtest.h>

#include <set>

#include "bagsim/io.hpp"
#include "support.hpp"

using namespace bagsim;
using namespace testing_support;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no bagsim::Error thrown";
  return ErrorCode::DomainError;
}

const char* kTwoNode = R"({"nodes":[{"id":0,"type":"LEAF","prob":1.0},{"id":1,"type":"OR","prob":0.5}],
                          "edges":[[0,1]],"goals":[1]})";

}  // namespace

TEST(Canonical, TwoNodeFile) {
  auto g = parse_canonical(kTwoNode);
  EXPECT_EQ(g.size(), 2u);
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}}));
  EXPECT_DOUBLE_EQ(g.node(1).local_prob, 0.5);
}

TEST(Canonical, PriorAboveOneIsMalformed) {
  std::string text = kTwoNode;
  text.replace(text.find("\"prob\":1.0"), 10, "\"prob\":1.2");
  EXPECT_EQ(code_of([&] { parse_canonical(text); }), ErrorCode::MalformedInput);
}

TEST(Canonical, SchemaErrors) {
  EXPECT_EQ(code_of([] { parse_canonical("{"); }), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of([] { parse_canonical("[]"); }), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of([] { parse_canonical(R"({"nodes":[{"id":0,"type":"LEAF"}]})"); }), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of([] { parse_canonical(R"({"nodes":[{"id":0,"type":"XOR","prob":1}]})"); }),
            ErrorCode::MalformedInput);
  EXPECT_EQ(code_of([] { parse_canonical(R"({"nodes":[{"id":-1,"type":"LEAF","prob":1}]})"); }),
            ErrorCode::MalformedInput);
  EXPECT_EQ(code_of([] { parse_canonical(R"({"nodes":[{"id":0,"type":"LEAF","prob":1}],"edges":[[0]]})"); }),
            ErrorCode::MalformedInput);
}

TEST(Canonical, InternalProbabilityDefaultsToOne) {
  auto g = parse_canonical(R"({"nodes":[{"id":0,"type":"LEAF","prob":0.5},{"id":1,"type":"AND"}],"edges":[[0,1]]})");
  EXPECT_EQ(g.node(1).local_prob, 1.0);
}

TEST(Canonical, StructuralProblemsAreValidationErrors) {
  EXPECT_EQ(code_of([] { load("cyclic.json"); }), ErrorCode::ValidationError);
}

TEST(Canonical, FixtureShape) {
  const auto g = enterprise();
  EXPECT_EQ(g.size(), 25u);
  std::set<NodeId> leaves;
  for (NodeId id : g.leaf_ids()) leaves.insert(id);
  EXPECT_EQ(leaves, (std::set<NodeId>{0, 5, 10, 13, 15, 16, 17, 18, 20, 21, 24}));
  EXPECT_EQ(g.goals(), std::vector<NodeId>{1});
  EXPECT_EQ(g.node(1).label, "execCode(dbServer,root)");
  EXPECT_EQ(g.node(0).label, "attackerLocated(internet)");
  EXPECT_EQ(g.node(6).label, "execCode(webServer,apache)");
  EXPECT_DOUBLE_EQ(g.node(17).local_prob, 0.9);
  EXPECT_DOUBLE_EQ(g.node(13).local_prob, 0.8);
  EXPECT_DOUBLE_EQ(g.node(18).local_prob, 0.8);
}

TEST(Canonical, RoundTrip) {
  for (const auto& g : {enterprise(), noisy_or()}) EXPECT_EQ(parse_canonical(serialize_canonical(g)), g);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticGraphSpec spec;
    spec.n_nodes = 60;
    spec.seed = seed;
    const auto g = generate_synthetic(spec);
    EXPECT_EQ(parse_canonical(serialize_canonical(g)), g);
    EXPECT_EQ(serialize_canonical(parse_canonical(serialize_canonical(g))), serialize_canonical(g));
  }
}

TEST(MulVal, DstSrcArc) {
  auto g = parse_mulval_csv("0,\"a\",\"LEAF\",1.0\n1,\"b\",\"OR\",0.5\n", "1,0,-1\n");
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}}));
  EXPECT_EQ(g.goals(), std::vector<NodeId>{1});
  EXPECT_EQ(g.node(0).label, "a");
}

TEST(MulVal, SrcDstMakesLeafATarget) {
  EXPECT_EQ(code_of([] {
              parse_mulval_csv("0,\"a\",\"LEAF\",1.0\n1,\"b\",\"OR\",0.5\n", "1,0,-1\n", ArcDirection::SrcDst);
            }),
            ErrorCode::ValidationError);
}

TEST(MulVal, UnknownKind) {
  EXPECT_EQ(code_of([] { parse_mulval_csv("0,\"a\",\"XOR\",1.0\n", ""); }), ErrorCode::UnknownNodeKind);
}

TEST(MulVal, BadRows) {
  EXPECT_EQ(code_of([] { parse_mulval_csv("0,\"a\",\"LEAF\"\n", ""); }), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of([] { parse_mulval_csv("0,\"a\",\"LEAF\",2\n", ""); }), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of([] { parse_mulval_csv("0,\"a\",\"LEAF\",1\n", "x,0,-1\n"); }), ErrorCode::MalformedInput);
}

TEST(MulVal, FixtureCsvMatchesJson) {
  auto csv = parse_mulval_csv(read_file(data_path("enterprise_VERTICES.CSV")),
                              read_file(data_path("enterprise_ARCS.CSV")));
  EXPECT_EQ(csv, enterprise());
}

TEST(Csv, QuotedFields) {
  EXPECT_EQ(split_csv_record(R"(1,"a,b","c""d",x)"), (std::vector<std::string>{"1", "a,b", "c\"d", "x"}));
  EXPECT_EQ(split_csv_record(""), std::vector<std::string>{""});
  EXPECT_EQ(code_of([] { split_csv_record("\"open"); }), ErrorCode::MalformedInput);
}

TEST(Evidence, ParseAndFormat) {
  const auto g = enterprise();
  auto e = parse_evidence("6=y, 11=n", g);
  EXPECT_EQ(e, (EvidenceSet{{6, true}, {11, false}}));
  EXPECT_EQ(format_evidence(e), "6=y,11=n");
  EXPECT_EQ(parse_evidence(format_evidence(e), g), e);
  EXPECT_TRUE(parse_evidence("", g).empty());
  EXPECT_EQ(parse_evidence("6=1,11=0", g), e);
}

TEST(Evidence, Errors) {
  const auto g = enterprise();
  EXPECT_EQ(code_of([&] { parse_evidence("99=y", g); }), ErrorCode::UnknownNode);
  EXPECT_EQ(code_of([&] { parse_evidence("6=maybe", g); }), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of([&] { parse_evidence("6", g); }), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of([&] { parse_evidence("6=y,6=n", g); }), ErrorCode::MalformedInput);
  EXPECT_EQ(code_of([&] { check_evidence({{99, true}}, g); }), ErrorCode::UnknownNode);
}
