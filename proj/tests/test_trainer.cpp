#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "topo/trainer.hpp"

using namespace topo;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("topo_trainer_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TrainConfig small_config(AttentionMode mode, std::size_t epochs = 3) {
  TrainConfig c;
  c.mode = mode;
  c.d = 16;
  c.epochs = epochs;
  c.batch_size = 32;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("tokenizer") {
  using V = std::vector<std::string>;
  CHECK(tokenize("Hello, World!") == V{"hello", ",", "world", "!"});
  CHECK(tokenize("a<br />b") == V{"a", "b"});
  CHECK(tokenize("x < y") == V{"x", "<", "y"});
  CHECK(tokenize("caf\xc3\xa9 ok") == V{"caf\xc3\xa9", "ok"});
  CHECK(tokenize("   ").empty());
}

TEST_CASE("vocabulary") {
  LabeledCorpus c;
  c.examples = {{1, "a b a"}};
  const Vocab v = build_vocab(c, 1);
  CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<unk>", "a", "b"});
  CHECK(v.id("a") == 2);
  CHECK(v.id("zzz") == Vocab::kUnk);

  const Vocab v2 = build_vocab(c, 2);
  CHECK(v2.size() == 3);
  CHECK(v2.id("b") == Vocab::kUnk);
  CHECK(v2.unknown_fraction("a b b") == doctest::Approx(2.0 / 3.0));

  LabeledCorpus ties;
  ties.examples = {{0, "c b a"}, {1, "b"}};
  const Vocab vt = build_vocab(ties, 1);
  CHECK(vt.tokens() == std::vector<std::string>{"<pad>", "<unk>", "b", "a", "c"});
  CHECK(build_vocab(ties, 1).tokens() == vt.tokens());

  const Vocab round = Vocab::from_json(vt.to_json());
  CHECK(round.tokens() == vt.tokens());

  Vocab trunc(std::vector<std::string>{"x"}, 2);
  CHECK(trunc.encode("x x x x").size() == 2);
  CHECK_THROWS_AS(build_vocab(LabeledCorpus{}, 1), Error);
}

TEST_CASE("corpus files") {
  const auto dir = temp_dir("corpus");
  {
    std::ofstream(dir / "ok.tsv") << "1\tgood film\r\n0\tbad film\n\n";
    std::ofstream(dir / "badlabel.tsv") << "2\tx\n";
    std::ofstream(dir / "notab.tsv") << "1 x\n";
    std::ofstream(dir / "empty.tsv") << "";
  }
  const auto c = read_corpus(dir / "ok.tsv");
  CHECK(c.size() == 2);
  CHECK(c.examples[0].label == 1);
  CHECK(c.examples[0].text == "good film");
  auto code_of = [](const fs::path& p) {
    try {
      read_corpus(p);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code_of(dir / "badlabel.tsv") == ErrorCode::DataError);
  CHECK(code_of(dir / "notab.tsv") == ErrorCode::DataError);
  CHECK(code_of(dir / "empty.tsv") == ErrorCode::EmptyCorpus);
  CHECK(code_of(dir / "missing.tsv") == ErrorCode::DataError);
  try {
    read_corpus(dir / "missing.tsv");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("missing.tsv") != std::string::npos);
  }
  write_corpus(dir / "copy.tsv", c);
  CHECK(read_corpus(dir / "copy.tsv").examples[1].text == "bad film");
}

TEST_CASE("config parsing") {
  using nlohmann::json;
  const auto sq = TrainConfig::from_json(json{{"mode", "SQ"}});
  CHECK(sq.batch_size == 128);
  CHECK(sq.epochs == 20);
  CHECK(sq.lr == 1e-3);
  const auto sqr = TrainConfig::from_json(json{{"mode", "SQR"}, {"r_sq", 0.1}, {"r_sr", 0.1}});
  CHECK(sqr.batch_size == 256);
  CHECK(sqr.r_sq == 0.1);
  CHECK(TrainConfig::from_json(json{{"mode", "SQR"}, {"batch_size", 8}}).batch_size == 8);

  auto code_of = [](const json& j) {
    try {
      TrainConfig::from_json(j);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code_of(json{{"epoch", 3}}) == ErrorCode::ConfigError);
  CHECK(code_of(json{{"d", 10}}) == ErrorCode::ConfigError);
  CHECK(code_of(json{{"d", "400"}}) == ErrorCode::ConfigError);
  CHECK(code_of(json{{"r_sq", 0.0}}) == ErrorCode::ConfigError);
  CHECK(code_of(json{{"epochs", 0}}) == ErrorCode::ConfigError);
  CHECK(code_of(json{{"mode", "dense"}}) == ErrorCode::ConfigError);

  const auto rel = TrainConfig::from_json(json{{"train_corpus", "data/a.tsv"}}, "/base");
  CHECK(rel.train_corpus == "/base/data/a.tsv");
  const auto back = TrainConfig::from_json(sqr.to_json());
  CHECK(back.to_json() == sqr.to_json());
}

TEST_CASE("synthetic corpus") {
  SeparableCorpusSpec spec;
  spec.sentences = 200;
  const auto a = make_separable_corpus(spec, 1);
  const auto b = make_separable_corpus(spec, 1);
  CHECK(a.size() == 200);
  std::size_t ones = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.examples[i].text == b.examples[i].text);
    ones += a.examples[i].label;
    const auto toks = tokenize(a.examples[i].text);
    const std::string cue = a.examples[i].label ? "pos" : "neg";
    const std::string other = a.examples[i].label ? "neg" : "pos";
    bool has = false;
    for (const auto& t : toks) {
      has = has || t.rfind(cue, 0) == 0;
      CHECK(t.rfind(other, 0) != 0);
    }
    CHECK(has);
  }
  CHECK(ones == 100);

  spec.negation_rate = 1.0;
  const auto neg = make_separable_corpus(spec, 2);
  for (const auto& ex : neg.examples) {
    const auto toks = tokenize(ex.text);
    CHECK(std::count(toks.begin(), toks.end(), "not") == 1);
    const std::string flipped = ex.label ? "neg" : "pos";
    CHECK(std::any_of(toks.begin(), toks.end(), [&](const std::string& t) { return t.rfind(flipped, 0) == 0; }));
  }
}

TEST_CASE("local negation inverts only the following cue") {
  SeparableCorpusSpec spec;
  spec.sentences = 100;
  spec.local_negation_rate = 1.0;
  const auto c = make_separable_corpus(spec, 3);
  for (const auto& ex : c.examples) {
    const auto toks = tokenize(ex.text);
    const std::string wrong = ex.label ? "pos" : "neg";
    const std::string right = ex.label ? "neg" : "pos";
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (toks[i].rfind(wrong, 0) == 0) FAIL("un-negated cue of the label's own class");
      if (toks[i].rfind(right, 0) == 0) {
        REQUIRE(i > 0);
        CHECK(toks[i - 1] == "not");
      }
    }
  }
  spec.local_negation_rate = 1.5;
  CHECK_THROWS_AS(make_separable_corpus(spec, 3), Error);
}

TEST_CASE("training on a separable corpus") {
  // Two disjoint vocabularies: every token carries the label.
  SeparableCorpusSpec spec;
  spec.sentences = 200;
  spec.cue_rate = 1.0;
  const auto corpus = make_separable_corpus(spec, 3);
  const auto test = make_separable_corpus(spec, 4);

  for (auto mode : {AttentionMode::Standard, AttentionMode::SQ, AttentionMode::SQR}) {
    CAPTURE(to_string(mode));
    auto cfg = small_config(mode, 20);
    const auto r = train(cfg, corpus, test);
    CHECK(r.history.size() == 20);
    CHECK(std::abs(r.first_batch_loss - std::log(2.0)) < 0.1);
    CHECK(r.history.back().accuracy == 1.0);
    CHECK(r.history.back().accuracy > 0.5);
    CHECK(evaluate(r.model, r.vocab, test) == r.history.back().accuracy);
  }
}

TEST_CASE("training is bit-reproducible") {
  SeparableCorpusSpec spec;
  spec.sentences = 120;
  const auto corpus = make_separable_corpus(spec, 8);
  const auto cfg = small_config(AttentionMode::SQR, 2);
  const auto a = train(cfg, corpus, corpus);
  const auto b = train(cfg, corpus, corpus);
  const auto pa = a.model.named_parameters(), pb = b.model.named_parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second.value() == pb[i].second.value());
  for (std::size_t e = 0; e < a.history.size(); ++e) CHECK(a.history[e].loss == b.history[e].loss);
}

TEST_CASE("reapply_abs keeps the output projection nonnegative") {
  SeparableCorpusSpec spec;
  spec.sentences = 80;
  const auto corpus = make_separable_corpus(spec, 9);
  auto cfg = small_config(AttentionMode::SQR, 2);
  cfg.reapply_abs = true;
  cfg.lr = 0.05;
  const auto r = train(cfg, corpus, corpus);
  CHECK((r.model.encoder().blocks()[0].attention.w_o.value().array() >= 0.0).all());
}

TEST_CASE("regression fit and sweep bookkeeping") {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8};
  const auto f = fit_line(x, y);
  REQUIRE(f);
  CHECK(f->slope == doctest::Approx(2.0));
  CHECK(f->intercept == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f->r2 == doctest::Approx(1.0));
  const std::vector<double> flat{3, 3, 3, 3};
  CHECK_FALSE(fit_line(flat, y));

  SeparableCorpusSpec spec;
  spec.sentences = 60;
  const auto corpus = make_separable_corpus(spec, 10);
  auto cfg = small_config(AttentionMode::SQR, 1);
  const std::vector<double> rq{0.1, 0.5}, rs{0.3};
  const auto sw = rf_sweep(cfg, rq, rs, corpus, corpus, 2);
  REQUIRE(sw.cells.size() == 2);
  CHECK(sw.cells[0].seed == cfg.seed);
  CHECK(sw.cells[1].seed == cfg.seed + 1);
  CHECK(sw.cells[0].accuracy.has_value());
  CHECK_FALSE(sw.fit_r_sr.has_value());  // single-valued r_sr grid
  CHECK(sw.fit_r_sq.has_value());

  const std::vector<double> bad{0.1, 2.0};
  const auto failing = rf_sweep(cfg, bad, rs, corpus, corpus, 1);
  CHECK(failing.cells[1].error.size() > 0);
  CHECK_FALSE(failing.cells[1].accuracy.has_value());
}

TEST_CASE("epoch time scales linearly with corpus size") {
  SeparableCorpusSpec spec;
  spec.sentences = 200;
  const auto small = make_separable_corpus(spec, 11);
  spec.sentences = 400;
  const auto large = make_separable_corpus(spec, 11);
  auto cfg = small_config(AttentionMode::SQ, 1);
  auto time_of = [&](const LabeledCorpus& c) {
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      train(cfg, c, c);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };
  const double ratio = time_of(large) / time_of(small);
  CHECK(ratio > 2.0 * 0.7);
  CHECK(ratio < 2.0 * 1.3);
}
