#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "defframe/frames.hpp"
#include "defframe/tagger.hpp"
#include "test_util.hpp"

using namespace defframe;
using testutil::TempDir;
using testutil::write_file;
using testutil::read_file;

namespace {

BasisStore abc_basis(const TempDir& dir) {
  const std::string path = dir.file("abc.txt");
  write_file(path,
             "a 1 0\n"
             "b 0 1\n"
             "c 2 2\n");
  return BasisStore::load(path);
}

}  // namespace

TEST_CASE("schema rows are named and ordered", "[frames]") {
  REQUIRE(kSchemaRows == 7);
  REQUIRE(schema_row_name(0) == "self");
  REQUIRE(schema_row_name(1) == "IsA");
  REQUIRE(schema_row_name(2) == "PartOf");
  REQUIRE(schema_row_name(3) == "HasA");
  REQUIRE(schema_row_name(4) == "MadeOf");
  REQUIRE(schema_row_name(5) == "UsedFor");
  REQUIRE(schema_row_name(6) == "Cause");
  REQUIRE_THROWS_AS(schema_row_name(7), std::invalid_argument);
  for (Relation rel : kAllRelations) {
    REQUIRE(schema_row_name(schema_row_of(rel)) == relation_name(rel));
  }
}

TEST_CASE("row masks parse, print, and count", "[frames]") {
  REQUIRE(RowMask::all().count() == 7);
  REQUIRE(RowMask::basic().count() == 2);
  REQUIRE(RowMask::parse("DF_all") == RowMask::all());
  REQUIRE(RowMask::parse("DF_basic") == RowMask::basic());
  REQUIRE(RowMask::parse("custom:self,IsA") == RowMask::basic());

  const auto custom = RowMask::parse("custom:UsedFor,self");
  REQUIRE(custom.count() == 2);
  REQUIRE(custom.rows[0]);
  REQUIRE(custom.rows[5]);
  REQUIRE(custom.to_string() == "custom:self,UsedFor");
  REQUIRE(RowMask::parse(custom.to_string()) == custom);
  REQUIRE(RowMask::all().to_string() == "DF_all");
  REQUIRE(RowMask::basic().to_string() == "DF_basic");
  REQUIRE(RowMask::parse("custom:self,IsA,PartOf,HasA,MadeOf,UsedFor,Cause") ==
          RowMask::all());

  REQUIRE_THROWS_AS(RowMask::parse("custom:Bogus"), ConfigError);
  REQUIRE_THROWS_AS(RowMask::parse("custom:"), ConfigError);
  REQUIRE_THROWS_AS(RowMask::parse("everything"), ConfigError);
}

TEST_CASE("definition frames accumulate deduplicated terms", "[frames]") {
  DefinitionFrame frame;
  frame.concept_name = "hammer";
  REQUIRE(frame.empty());
  frame.add_term(Relation::IsA, "tool");
  frame.add_term(Relation::IsA, "tool");  // duplicate ignored
  frame.add_term(Relation::UsedFor, "driving nails");
  REQUIRE_FALSE(frame.empty());
  REQUIRE(frame.terms(Relation::IsA) == std::vector<std::string>{"tool"});
  REQUIRE(frame.terms(Relation::UsedFor) ==
          std::vector<std::string>{"driving nails"});
  REQUIRE(frame.terms(Relation::PartOf).empty());
}

TEST_CASE("encoding averages resolvable terms per row", "[frames]") {
  TempDir dir;
  const auto basis = abc_basis(dir);

  DefinitionFrame frame;
  frame.concept_name = "a";
  frame.add_term(Relation::IsA, "b");
  frame.add_term(Relation::IsA, "c");
  frame.add_term(Relation::UsedFor, "b c");      // multiword: mean of b and c
  frame.add_term(Relation::PartOf, "unknown");   // resolves to nothing
  const auto result = encode_frame(frame, basis);

  REQUIRE(result.frame.concept_name == "a");
  REQUIRE(result.frame.dim == 2);
  REQUIRE(result.frame.data.size() == kSchemaRows * 2);
  REQUIRE(result.frame.row(0)[0] == 1.0);
  REQUIRE(result.frame.row(0)[1] == 0.0);
  const auto isa = result.frame.row(schema_row_of(Relation::IsA));
  REQUIRE(isa[0] == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(isa[1] == Catch::Approx(1.5).margin(1e-15));
  const auto used = result.frame.row(schema_row_of(Relation::UsedFor));
  REQUIRE(used[0] == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(used[1] == Catch::Approx(1.5).margin(1e-15));
  for (std::size_t r : {2, 3, 6}) {
    REQUIRE(all_zero(result.frame.row(r)));
  }
  REQUIRE(result.unresolved == std::vector<std::string>{"unknown"});

  // Concept absent from the basis: row 0 stays zero and is reported.
  DefinitionFrame missing;
  missing.concept_name = "zzz";
  const auto miss = encode_frame(missing, basis);
  REQUIRE(all_zero(miss.frame.row(0)));
  REQUIRE(miss.unresolved == std::vector<std::string>{"zzz"});
}

TEST_CASE("frame similarity respects the row mask", "[frames]") {
  TempDir dir;
  const auto basis = abc_basis(dir);

  DefinitionFrame fa;
  fa.concept_name = "a";
  fa.add_term(Relation::IsA, "b");
  DefinitionFrame fb;
  fb.concept_name = "b";
  fb.add_term(Relation::IsA, "b");
  const auto ea = encode_frame(fa, basis).frame;
  const auto eb = encode_frame(fb, basis).frame;

  // Identical frames are perfectly similar under any mask.
  const auto self_sim = frame_similarity(ea, ea, RowMask::all());
  REQUIRE_FALSE(self_sim.degenerate);
  REQUIRE(self_sim.value == Catch::Approx(1.0).margin(1e-12));

  // Restricting to the identical IsA rows also gives 1.
  const auto isa_only = frame_similarity(ea, eb, RowMask::parse("custom:IsA"));
  REQUIRE(isa_only.value == Catch::Approx(1.0).margin(1e-12));

  // Restricting to orthogonal self rows gives 0.
  const auto self_only = frame_similarity(ea, eb, RowMask::parse("custom:self"));
  REQUIRE(self_only.value == Catch::Approx(0.0).margin(1e-12));

  // Hand-checked full-mask value: (a·b + b·b) / (|[a;b]| * |[b;b]|).
  const auto full = frame_similarity(ea, eb, RowMask::all());
  REQUIRE(full.value == Catch::Approx(1.0 / 2.0).margin(1e-12));

  // A masked side with only zero rows is degenerate.
  const auto degenerate =
      frame_similarity(ea, eb, RowMask::parse("custom:PartOf"));
  REQUIRE(degenerate.degenerate);
  REQUIRE(degenerate.value == 0.0);

  EncodedFrame other = ea;
  other.dim = 3;
  other.data.resize(kSchemaRows * 3, 0.0);
  REQUIRE_THROWS_AS(frame_similarity(ea, other, RowMask::all()),
                    std::invalid_argument);
}

TEST_CASE("decoding maps rows back to nearest vocabulary", "[frames]") {
  TempDir dir;
  const auto basis = abc_basis(dir);
  DefinitionFrame frame;
  frame.concept_name = "a";
  frame.add_term(Relation::IsA, "b");
  const auto enc = encode_frame(frame, basis).frame;

  const auto decoded = decode_frame(enc, basis, 2);
  REQUIRE(decoded.size() == kSchemaRows);
  REQUIRE(decoded[0].first == "self");
  REQUIRE(decoded[0].second.size() == 2);
  REQUIRE(decoded[0].second[0].term == "a");
  REQUIRE(decoded[0].second[0].score == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(decoded[1].first == "IsA");
  REQUIRE(decoded[1].second[0].term == "b");
  // Zero rows decode to nothing.
  REQUIRE(decoded[2].second.empty());
  REQUIRE(decoded[6].second.empty());
}

TEST_CASE("frames round-trip through the JSONL file", "[frames]") {
  TempDir dir;
  DefinitionFrame f1;
  f1.concept_name = "hammer";
  f1.add_term(Relation::IsA, "tool");
  f1.add_term(Relation::UsedFor, "driving nails");
  DefinitionFrame f2;
  f2.concept_name = "empty one";  // no relations: still round-trips

  const std::string path = dir.file("frames.jsonl");
  write_frames(path, {f1, f2});
  const auto back = read_frames(path);
  REQUIRE(back.size() == 2);
  REQUIRE(back[0] == f1);
  REQUIRE(back[1] == f2);

  // Only nonempty relation lists are serialized.
  const auto text = read_file(path);
  REQUIRE(text.find("\"IsA\"") != std::string::npos);
  REQUIRE(text.find("\"PartOf\"") == std::string::npos);

  write_file(dir.file("bad.jsonl"), "{\"concept\":1}\n");
  REQUIRE_THROWS_AS(read_frames(dir.file("bad.jsonl")), FormatError);
  write_file(dir.file("badrel.jsonl"),
             "{\"concept\":\"x\",\"relations\":{\"Bogus\":[\"y\"]}}\n");
  REQUIRE_THROWS_AS(read_frames(dir.file("badrel.jsonl")), FormatError);
  write_file(dir.file("notjson.jsonl"), "not json at all\n");
  REQUIRE_THROWS_AS(read_frames(dir.file("notjson.jsonl")), FormatError);
}

TEST_CASE("encoded frames round-trip value-exactly", "[frames]") {
  TempDir dir;
  const auto basis = abc_basis(dir);
  std::vector<EncodedFrame> frames;
  Rng rng(77);
  for (int i = 0; i < 5; ++i) {
    EncodedFrame f;
    f.concept_name = "concept " + std::to_string(i);
    f.dim = 2;
    f.data.resize(kSchemaRows * 2);
    for (auto& x : f.data) x = rng.uniform() * 2.0 - 1.0;
    frames.push_back(std::move(f));
  }
  frames[0].data[3] = 1.0 / 3.0;  // not exactly representable in decimal

  const std::string path = dir.file("frames.enc");
  write_encoded(path, frames);
  const auto back = read_encoded(path);
  REQUIRE(back == frames);

  // Empty set needs an explicit dimension for the header.
  const std::string empty_path = dir.file("empty.enc");
  REQUIRE_THROWS_AS(write_encoded(empty_path, {}), std::invalid_argument);
  write_encoded(empty_path, {}, 2);
  REQUIRE(read_encoded(empty_path).empty());

  write_file(dir.file("bad.enc"), "defframe-enc/1 6 2\n");
  REQUIRE_THROWS_AS(read_encoded(dir.file("bad.enc")), FormatError);
  write_file(dir.file("bad2.enc"), "other-header 7 2\n");
  REQUIRE_THROWS_AS(read_encoded(dir.file("bad2.enc")), FormatError);
}

TEST_CASE("frame index is case-insensitive and first-wins", "[frames]") {
  EncodedFrame f1;
  f1.concept_name = "Hammer";
  f1.dim = 1;
  f1.data.assign(kSchemaRows, 1.0);
  EncodedFrame f2;
  f2.concept_name = "hammer";
  f2.dim = 1;
  f2.data.assign(kSchemaRows, 2.0);

  const auto index = index_frames({f1, f2});
  REQUIRE(index.size() == 1);
  REQUIRE(index.at("hammer").data[0] == 1.0);

  FrameRepresenter rep(index, RowMask::all());
  REQUIRE(rep.has("HAMMER"));
  REQUIRE_FALSE(rep.has("wrench"));
  REQUIRE(*rep.score("Hammer", "hammer") == Catch::Approx(1.0).margin(1e-12));
  REQUIRE_FALSE(rep.score("hammer", "wrench").has_value());
}

TEST_CASE("extraction marks the query span and joins multiword terms", "[frames]") {
  TempDir dir;
  const std::string path = dir.file("basis.txt");
  write_file(path,
             "claw 1 0\n"
             "hammer 0 1\n"
             "tool 1 1\n"
             "a 0.1 0.1\n"
             "is 0.2 0.1\n");
  const auto basis = BasisStore::load(path);

  TaggerConfig cfg;
  cfg.hidden_size = 2;
  cfg.pos_embed_dim = 2;
  cfg.chunk_embed_dim = 2;
  cfg.query_embed_dim = 2;
  cfg.seed = 4;
  const auto model = TaggerModel::create(cfg, basis.dim());

  const auto result =
      extract_frame(model, basis, "claw hammer", "A claw hammer is a tool.");
  REQUIRE(result.concept_found);
  REQUIRE(result.frame.concept_name == "claw hammer");
  // Untrained predictions are arbitrary but every produced term must be a
  // contiguous token sequence from the sentence.
  for (Relation rel : kAllRelations) {
    for (const auto& term : result.frame.terms(rel)) {
      REQUIRE_FALSE(term.empty());
      REQUIRE(term.find("  ") == std::string::npos);
    }
  }

  const auto missing =
      extract_frame(model, basis, "wrench", "A claw hammer is a tool.");
  REQUIRE_FALSE(missing.concept_found);
  const auto empty = extract_frame(model, basis, "claw hammer", "   ");
  REQUIRE_FALSE(empty.concept_found);
  REQUIRE(empty.frame.empty());
}
