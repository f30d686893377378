#include <doctest.h>

#include <cstdio>
#include <random>

#include "zoomin/model_io.hpp"

using namespace zoomin;
using namespace zoomin::model_io;
using zoomin::geometry::BBox;

TEST_SUITE("model_io") {

TEST_CASE("verdict round-trips its canonical strings") {
  CHECK(to_string(Verdict::Real) == "real");
  CHECK(to_string(Verdict::Generated) == "generated");
  CHECK(verdict_from_string("real") == Verdict::Real);
  CHECK(verdict_from_string(" GENERATED\n") == Verdict::Generated);
  CHECK(verdict_from_string("maybe") == std::nullopt);
}

TEST_CASE("parse_stage1 canonical forms") {
  auto p = parse_stage1("<verdict>real</verdict><boxes>[]</boxes><explanation>ok</explanation>");
  REQUIRE(p.has_value());
  CHECK(p->verdict == Verdict::Real);
  CHECK(p->boxes.empty());
  CHECK(p->explanation == "ok");
  CHECK_FALSE(p->malformed_boxes);

  p = parse_stage1(
      "<verdict>generated</verdict><boxes>[[10,20,110,220]]</boxes>"
      "<explanation>blurred text</explanation>");
  REQUIRE(p.has_value());
  CHECK(p->verdict == Verdict::Generated);
  REQUIRE(p->boxes.size() == 1);
  CHECK(p->boxes[0] == BBox{10, 20, 110, 220});
  CHECK(p->explanation == "blurred text");
}

TEST_CASE("parse_stage1 tolerates the grounder JSON style") {
  const std::string completion =
      "Here are regions: [{\"bbox_2d\": [0,0,50,50], \"label\": \"hand\"}] "
      "<verdict>generated</verdict>";
  auto p = parse_stage1(completion);
  REQUIRE(p.has_value());
  CHECK(p->verdict == Verdict::Generated);
  REQUIRE(p->boxes.size() == 1);
  // oracle: hand-walk the fixture string for the bbox_2d payload
  {
    auto at = completion.find("\"bbox_2d\": [");
    REQUIRE(at != std::string::npos);
    int x1, y1, x2, y2;
    REQUIRE(std::sscanf(completion.c_str() + at + 11, "[%d,%d,%d,%d]", &x1, &y1, &x2,
                        &y2) == 4);
    CHECK(p->boxes[0] == BBox{x1, y1, x2, y2});
  }
  // residual text becomes the explanation
  CHECK(p->explanation == "Here are regions:");
}

TEST_CASE("parse_stage1 malformed box block is a warning, not a failure") {
  auto p = parse_stage1("<verdict>real</verdict><boxes>[[1,2],[3]]</boxes>");
  REQUIRE(p.has_value());
  CHECK(p->boxes.empty());
  CHECK(p->malformed_boxes);

  p = parse_stage1("<verdict>real</verdict><boxes>not json</boxes>");
  REQUIRE(p.has_value());
  CHECK(p->boxes.empty());
  CHECK(p->malformed_boxes);
}

TEST_CASE("parse_stage2") {
  auto p = parse_stage2("<verdict>real</verdict><explanation>windows render naturally</explanation>");
  REQUIRE(p.has_value());
  CHECK(p->verdict == Verdict::Real);
  CHECK(p->explanation == "windows render naturally");

  p = parse_stage2("<verdict>GENERATED</verdict>");
  REQUIRE(p.has_value());
  CHECK(p->verdict == Verdict::Generated);
  CHECK(p->explanation.empty());

  CHECK_FALSE(parse_stage2("no tags at all").has_value());
}

TEST_CASE("tag matching is case-insensitive and whitespace tolerant") {
  auto p = parse_stage2("<VERDICT>  Real </Verdict>");
  REQUIRE(p.has_value());
  CHECK(p->verdict == Verdict::Real);

  p = parse_stage2("  \n <verdict>generated</verdict> \t ");
  REQUIRE(p.has_value());
  CHECK(p->verdict == Verdict::Generated);
}

TEST_CASE("first well-formed verdict tag wins") {
  auto p = parse_stage2("<verdict>real</verdict> ... <verdict>generated</verdict>");
  REQUIRE(p.has_value());
  CHECK(p->verdict == Verdict::Real);

  // an invalid-content tag does not shadow a later valid one
  p = parse_stage2("<verdict>maybe</verdict> then <verdict>generated</verdict>");
  REQUIRE(p.has_value());
  CHECK(p->verdict == Verdict::Generated);
}

TEST_CASE("format_reward") {
  CHECK(format_reward("<verdict>generated</verdict>") == 1);
  CHECK(format_reward("<verdict>maybe</verdict>") == 0);
  CHECK(format_reward("verdict: real") == 0);
}

TEST_CASE("format_reward agrees with parse_stage2 success") {
  const char* fixtures[] = {
      "<verdict>real</verdict>",
      "<verdict> generated </verdict> trailing",
      "<verdict>unknown</verdict>",
      "<verdict>real",
      "prose only",
      "<verdict></verdict><verdict>real</verdict>",
  };
  for (const char* text : fixtures)
    CHECK(format_reward(text) == (parse_stage2(text).has_value() ? 1 : 0));
}

TEST_CASE("serialize_target fixtures") {
  CHECK(serialize_target(Verdict::Real, std::vector<BBox>{}, std::string("x"), 1) ==
        "<verdict>real</verdict><boxes>[]</boxes><explanation>x</explanation>");
  CHECK(serialize_target(Verdict::Generated, std::nullopt, std::string("e"), 2) ==
        "<verdict>generated</verdict><explanation>e</explanation>");

  auto target = serialize_target(Verdict::Generated, std::vector<BBox>{{1, 2, 3, 4}},
                                 std::string("e"), 1);
  auto p = parse_stage1(target);
  REQUIRE(p.has_value());
  CHECK(p->verdict == Verdict::Generated);
  CHECK(p->boxes == std::vector<BBox>{{1, 2, 3, 4}});
  CHECK(p->explanation == "e");

  CHECK_THROWS_AS(serialize_target(Verdict::Real, std::nullopt, std::string("e"), 1),
                  MissingAnnotation);
  CHECK_THROWS_AS(serialize_target(Verdict::Real, std::vector<BBox>{}, std::nullopt, 1),
                  MissingAnnotation);
  CHECK_THROWS_AS(serialize_target(Verdict::Real, std::nullopt, std::nullopt, 2),
                  MissingAnnotation);
}

TEST_CASE("serialize/parse round-trip on randomized records") {
  std::mt19937_64 rng(31);
  const char* words[] = {"blurry", "text", "edge", "shadow", "hand", "texture",
                         "skyline", "reflection", "seam", "pattern"};
  for (int trial = 0; trial < 60; ++trial) {
    Verdict label = rng() % 2 ? Verdict::Real : Verdict::Generated;
    std::vector<BBox> boxes;
    const int nb = static_cast<int>(rng() % 5);
    for (int i = 0; i < nb; ++i) {
      int x1 = static_cast<int>(rng() % 500), y1 = static_cast<int>(rng() % 500);
      boxes.push_back({x1, y1, x1 + 1 + static_cast<int>(rng() % 100),
                       y1 + 1 + static_cast<int>(rng() % 100)});
    }
    std::string expl;
    const int nw = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < nw; ++i) {
      if (i) expl += ' ';
      expl += words[rng() % 10];
    }

    auto t1 = serialize_target(label, boxes, expl, 1);
    auto p1 = parse_stage1(t1);
    REQUIRE(p1.has_value());
    CHECK(p1->verdict == label);
    CHECK(p1->boxes == boxes);
    CHECK(p1->explanation == expl);
    CHECK(format_reward(t1) == 1);

    auto t2 = serialize_target(label, std::nullopt, expl, 2);
    auto p2 = parse_stage2(t2);
    REQUIRE(p2.has_value());
    CHECK(p2->verdict == label);
    CHECK(p2->explanation == expl);
  }
}

TEST_CASE("extract_boxes standalone") {
  auto e = extract_boxes("<boxes>[[1,1,5,5]]</boxes>");
  CHECK(e.block_found);
  CHECK_FALSE(e.malformed);
  CHECK(e.boxes == std::vector<BBox>{{1, 1, 5, 5}});

  e = extract_boxes("nothing here");
  CHECK_FALSE(e.block_found);
  CHECK(e.boxes.empty());

  e = extract_boxes("list: []");
  CHECK(e.block_found);
  CHECK(e.boxes.empty());
  CHECK_FALSE(e.malformed);

  // floats are rounded to the nearest integer
  e = extract_boxes("<boxes>[[1.4, 2.6, 10.0, 20.5]]</boxes>");
  CHECK(e.boxes == std::vector<BBox>{{1, 3, 10, 21}});
}

}  // TEST_SUITE
