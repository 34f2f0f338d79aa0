// Acceptance checks. One PASS/FAIL/SKIP line per criterion; exit status is
// nonzero when any criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "mock_llm.hpp"
#include "oracles.hpp"
#include "pipeline_fixture.hpp"
#include "scripted_transport.hpp"
#include "ssbc/agreement.hpp"
#include "ssbc/distress_probe.hpp"
#include "ssbc/llm_gateway.hpp"
#include "ssbc/pipeline.hpp"
#include "ssbc/shard_engine.hpp"
#include "ssbc/ssbc_annotator.hpp"
#include "ssbc/stats/contingency.hpp"
#include "ssbc/stats/logistic.hpp"
#include "ssbc/stats/per_tag.hpp"
#include "ssbc/stats/random_intercept.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace ssbc;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::string detail;
  bool skipped = false;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

// ---- statistics ----

Check stats_oracles() {
  Check c;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t rows = 2 + rng() % 3;
    const std::size_t cols = 2 + rng() % 3;
    std::vector<std::vector<double>> t(rows, std::vector<double>(cols));
    stats::CountTable table{rows, cols, {}};
    for (auto& row : t) {
      for (auto& v : row) {
        v = static_cast<double>(1 + rng() % 40);
        table.counts.push_back(v);
      }
    }
    const auto got = stats::chi_square(table);
    const auto want = oracle::chi_square(t);
    c.expect(std::abs(got.chi2 - want.chi2) <= 1e-9, "chi2 rep " + std::to_string(rep));
    c.expect(got.df == want.df, "df rep " + std::to_string(rep));
    c.expect(std::abs(got.p - want.p) <= 1e-6, "p rep " + std::to_string(rep));
    const double n = table.total();
    c.expect(std::abs(stats::cramers_v(got.chi2, n, rows, cols) - oracle::cramers_v(want.chi2, n, rows, cols)) <= 1e-9,
             "cramers_v rep " + std::to_string(rep));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> p(1 + rng() % 20);
    for (auto& v : p) v = rep % 3 == 0 ? std::round(unit(rng) * 10) / 100 : unit(rng) * 0.2;  // ties every third rep
    const auto got = stats::bh_fdr(p, 0.05);
    const auto want = oracle::bh_adjust(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      c.expect(std::abs(got.adjusted[i] - want[i]) <= 1e-9, "bh rep " + std::to_string(rep));
      c.expect(got.reject[i] == (want[i] <= 0.05), "bh reject rep " + std::to_string(rep));
    }
  }
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> rates(2 + rng() % 4);
    for (auto& v : rates) v = unit(rng);
    c.expect(std::abs(stats::delta_pp(rates) - oracle::delta_pp(rates)) <= 1e-9, "delta_pp rep " + std::to_string(rep));
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 5.0, "took " + fmt(secs) + " s");
  if (c.ok) c.detail = "200 randomized cases in " + fmt(secs) + " s";
  return c;
}

Check logistic_recovery() {
  Check c;
  const auto t0 = Clock::now();
  const auto plain = synthetic::logit_data(5000, -0.5, 0.8, 11);
  const auto fit = stats::fit_logistic(plain.x, plain.y);
  c.expect(std::abs(fit.beta[0] + 0.5) <= 0.1 && std::abs(fit.beta[1] - 0.8) <= 0.1,
           "beta " + fmt(fit.beta[0]) + "," + fmt(fit.beta[1]));

  const auto clustered = synthetic::clustered_logit_data(200, 10, -0.5, 0.8, 1.0, 12);
  const auto cfit = stats::fit_logistic(clustered.x, clustered.y);
  const auto se = stats::clustered_se(cfit, clustered.x, clustered.y, clustered.clusters);
  const auto boot = synthetic::cluster_bootstrap_se(clustered, 500, 13);
  double worst = 0;
  for (std::size_t j = 0; j < 2; ++j) worst = std::max(worst, std::abs(se.std_errors[j] / boot[j] - 1.0));
  c.expect(worst <= 0.15, "clustered SE off bootstrap by " + fmt(100 * worst) + "%");

  const auto ri = synthetic::clustered_logit_data(500, 8, 0.5, -0.25, 1.0, 14);
  const auto rfit = stats::fit_random_intercept_logit(ri.x, ri.y, ri.clusters);
  c.expect(std::abs(rfit.sigma_u - 1.0) <= 0.25, "sigma_u " + fmt(rfit.sigma_u));
  c.expect(rfit.beta.size() == 2 && std::abs(rfit.beta[0] - 0.5) <= 0.15 && std::abs(rfit.beta[1] + 0.25) <= 0.15,
           "random-intercept beta off");
  const double secs = seconds_since(t0);
  c.expect(secs < 120.0, "took " + fmt(secs) + " s");
  if (c.ok) {
    c.detail = "SE gap " + fmt(100 * worst) + "%, sigma_u " + fmt(rfit.sigma_u) + ", " + fmt(secs) + " s";
  }
  return c;
}

// ---- probe ----

int argmax(const std::array<double, 3>& p) { return static_cast<int>(std::ranges::max_element(p) - p.begin()); }

Check probe_suite() {
  Check c;
  const auto train = synthetic::gaussian_classes(200, 64, 5.0, 21);
  const auto held = synthetic::gaussian_classes(100, 64, 5.0, 22, 1, "h");
  const auto model = train_probe(train);
  std::vector<int> predicted;
  for (std::size_t i = 0; i < held.rows(); ++i) predicted.push_back(argmax(model.predict_proba(held.row(i))));
  const double f1 = classification_metrics(held.y, predicted).macro_f1;
  c.expect(f1 >= 0.95, "held-out macro-F1 " + fmt(f1));

  // ensemble of differently trained members
  EnsembleProbe ensemble;
  for (std::uint16_t layer = 0; layer < 3; ++layer) {
    auto m = train_probe(synthetic::gaussian_classes(30, 64, 1.0 + layer, 30 + layer));
    m.layer = layer;
    ensemble.members.push_back(std::move(m));
  }
  std::mt19937_64 rng(23);
  std::normal_distribution<float> noise(0.0f, 3.0f);
  double worst_sum = 0;
  for (int i = 0; i < 1000; ++i) {
    std::map<std::uint16_t, std::vector<float>> vectors;
    for (std::uint16_t layer = 0; layer < 3; ++layer) {
      auto& v = vectors[layer];
      for (int k = 0; k < 64; ++k) v.push_back(noise(rng));
    }
    const auto est = ensemble_predict(ensemble, vectors);
    worst_sum = std::max(worst_sum, std::abs(est.probabilities[0] + est.probabilities[1] + est.probabilities[2] - 1.0));
    c.expect(std::ranges::all_of(est.probabilities, [](double p) { return p >= 0 && p <= 1; }), "probability range");
  }
  c.expect(worst_sum <= 1e-9, "probabilities sum off by " + fmt(worst_sum));

  // analytic gradient against central differences on a 10-example fixture
  const std::size_t d = 5;
  std::vector<double> z(10 * d);
  std::vector<int> y(10);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : z) v = g(rng);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 3);
  std::vector<double> params(3 * d + 3);
  for (auto& v : params) v = 0.5 * g(rng);
  std::vector<double> grad;
  softmax_objective(z, d, y, 0.7, params, &grad);
  double worst_rel = 0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    auto hi = params;
    auto lo = params;
    const double h = 1e-6;
    hi[j] += h;
    lo[j] -= h;
    const double fd = (softmax_objective(z, d, y, 0.7, hi, nullptr) - softmax_objective(z, d, y, 0.7, lo, nullptr)) / (2 * h);
    worst_rel = std::max(worst_rel, std::abs(fd - grad[j]) / std::max(1e-8, std::max(std::abs(fd), std::abs(grad[j]))));
  }
  c.expect(worst_rel <= 1e-4, "gradient relative error " + fmt(worst_rel));

  // grouped folds: no group on both sides of any split, and the scaler sees train rows only
  const auto grouped = synthetic::gaussian_classes(40, 8, 2.0, 24, 4);
  const auto cv = cross_validate(grouped, 5, 25);
  std::map<std::string, std::set<int>> folds_of_group;
  for (std::size_t i = 0; i < grouped.rows(); ++i) folds_of_group[grouped.groups[i]].insert(cv.fold_of_row[i]);
  for (const auto& [group, folds] : folds_of_group) c.expect(folds.size() == 1, "group " + group + " split across folds");
  for (int f = 0; f < 5; ++f) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < grouped.rows(); ++i) {
      if (cv.fold_of_row[i] != f) rows.push_back(i);
    }
    const auto expected = fit_standardization(subset(grouped, rows));
    const auto& got = cv.fold_standardization.at(static_cast<std::size_t>(f));
    bool same = got.mean.size() == expected.mean.size();
    for (std::size_t k = 0; same && k < got.mean.size(); ++k) {
      same = std::abs(got.mean[k] - expected.mean[k]) <= 1e-12 && std::abs(got.scale[k] - expected.scale[k]) <= 1e-12;
    }
    c.expect(same, "fold " + std::to_string(f) + " standardization uses held-out rows");
  }
  if (c.ok) c.detail = "macro-F1 " + fmt(f1) + ", grad err " + fmt(worst_rel);
  return c;
}

// ---- consensus ----

Check consensus_suite() {
  Check c;
  const auto t0 = Clock::now();
  std::size_t triples = 0;
  for (LabelMask a = 0; a < 16; ++a) {
    for (LabelMask b = 0; b < 16; ++b) {
      for (LabelMask d = 0; d < 16; ++d) {
        ++triples;
        const std::array<LabelMask, 3> runs{a, b, d};
        const LabelMask got = consensus_of(runs).labels.mask();
        const std::string at = std::to_string(a) + "/" + std::to_string(b) + "/" + std::to_string(d);
        c.expect(got == oracle::consensus(runs, 4), "oracle mismatch at " + at);
        const LabelMask unanimous = a & b & d;
        if (std::popcount(static_cast<unsigned>(unanimous)) <= 3) {
          c.expect((got & unanimous) == unanimous, "unanimous label lost at " + at);
        } else {
          c.expect((got & unanimous) == got && std::popcount(static_cast<unsigned>(got)) == 3,
                   "four unanimous labels not capped to unanimous ones at " + at);
        }
        const LabelMask singletons = static_cast<LabelMask>((a ^ b ^ d) & ~(a & b & d));
        c.expect((got & singletons) == 0, "singleton kept at " + at);
        c.expect(std::popcount(static_cast<unsigned>(got)) <= 3, "more than three labels at " + at);
        for (int l = 0; l < 4; ++l) {
          const auto bitl = static_cast<LabelMask>(1u << l);
          if (!(got & bitl)) continue;
          for (std::size_t r = 0; r < 3; ++r) {
            auto more = runs;
            more[r] |= bitl;
            c.expect(consensus_of(more).labels.mask() & bitl, "adding a vote removed a label at " + at);
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 1.0, "took " + fmt(secs) + " s");
  if (c.ok) c.detail = std::to_string(triples) + " triples in " + fmt(secs) + " s";
  return c;
}

// ---- shards ----

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  std::vector<json> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

std::string squash(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!out.empty() && out.back() != ' ') out.push_back(' ');
    } else {
      out.push_back(ch);
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

Check shard_validation() {
  Check c;
  const auto posts = read_jsonl(ssbc::testing::fixture("shard_posts.jsonl"));
  const auto scripts = read_jsonl(ssbc::testing::fixture("shard_teacher.jsonl"));
  c.expect(posts.size() == 20 && scripts.size() == 20, "fixture size");
  std::size_t accepted_total = 0;
  std::size_t paraphrases = 0;
  for (std::size_t i = 0; i < std::min(posts.size(), scripts.size()); ++i) {
    const auto& p = posts[i];
    const auto& s = scripts[i];
    const Post post{p.at("post_id"), p.at("community"), p.at("title"), p.at("body"), std::nullopt};
    auto attempts = s.at("attempts").get<std::vector<std::vector<std::string>>>();
    std::size_t next = 0;
    auto transport = std::make_unique<ssbc::testing::FunctionTransport>([&](const std::string&, const std::string&) {
      const auto& a = attempts[std::min(next++, attempts.size() - 1)];
      return HttpResult{200, ssbc::testing::completion_body(json(a).dump()), ""};
    });
    ssbc::testing::TempDir dir;
    LlmGateway gw(ssbc::testing::fast_options(), std::make_shared<ResponseCache>(dir / "cache"), std::move(transport));
    ShardTeacherConfig cfg;
    cfg.endpoint = "http://teacher.invalid/v1";
    cfg.model = "teacher";
    const auto out = extract_shards(post, gw, cfg, ShardValidator{});
    const std::string id = post.post_id;
    c.expect(out.excluded == s.at("expect_excluded").get<bool>(), id + " exclusion");

    // independent re-check of every accepted shard
    const auto body = squash(post.body);
    std::size_t cursor = 0;
    for (const auto& sh : out.shards) {
      const auto text = squash(sh.text);
      const auto at = body.find(text, cursor);
      c.expect(at != std::string::npos, id + " shard not a verbatim substring in order: " + sh.text);
      if (at != std::string::npos) cursor = at + text.size();
      std::istringstream words(text);
      c.expect(std::distance(std::istream_iterator<std::string>(words), std::istream_iterator<std::string>()) >= 3,
               id + " shard shorter than three words");
      ++accepted_total;
    }
    for (const auto& para : s.at("paraphrases")) {
      ++paraphrases;
      const auto text = para.get<std::string>();
      c.expect(std::ranges::none_of(out.shards, [&](const Shard& sh) { return sh.text == text; }),
               id + " paraphrase accepted");
    }
  }
  if (c.ok) {
    c.detail = std::to_string(accepted_total) + " shards checked, " + std::to_string(paraphrases) + " paraphrases rejected";
  }
  return c;
}

// ---- end to end over HTTP ----

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    out[e.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

Check golden_e2e() {
  Check c;
  const auto t0 = Clock::now();
  mock::MockServer server;
  const int port = server.start("127.0.0.1", 0);
  ssbc::testing::TempDir dir;
  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  const auto write_cfg = [&](const std::string& run) {
    const auto path = dir / (run + ".json");
    std::ofstream(path) << ssbc::testing::mock_config_json(dir / "runs", run, base).dump(2);
    return path.string();
  };
  const auto cli = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return std::pair{code, out.str() + err.str()};
  };

  const auto cfg1 = write_cfg("r1");
  auto [code1, log1] = cli({"--config", cfg1, "run", "all"});
  c.expect(code1 == 0, "first run failed: " + log1);
  const auto reports1 = read_dir(dir / "runs" / "r1" / "reports");
  c.expect(!reports1.empty(), "no reports written");
  const auto served = server.requests();
  c.expect(served > 0, "mock server saw no traffic");

  auto [code2, log2] = cli({"--config", cfg1, "run", "all", "--force"});
  c.expect(code2 == 0, "forced rerun failed: " + log2);
  c.expect(log2.find("network_calls=0 ") != std::string::npos, "forced rerun went to the network");
  c.expect(server.requests() == served, "server saw requests during the rerun");
  c.expect(read_dir(dir / "runs" / "r1" / "reports") == reports1, "reports changed on rerun");

  auto [code3, log3] = cli({"--config", write_cfg("r2"), "run", "all"});
  c.expect(code3 == 0, "fresh run failed: " + log3);
  c.expect(read_dir(dir / "runs" / "r2" / "reports") == reports1, "fresh run rendered different reports");
  server.stop();

  const double secs = seconds_since(t0);
  c.expect(secs < 30.0, "took " + fmt(secs) + " s");
  if (c.ok) c.detail = std::to_string(served) + " HTTP requests, " + std::to_string(reports1.size()) + " reports, " + fmt(secs) + " s";
  return c;
}

// ---- agreement ----

Check agreement_suite() {
  Check c;
  std::mt19937_64 rng(41);
  std::vector<LabelMask> masks(200);
  for (auto& m : masks) {
    do {
      m = static_cast<LabelMask>(rng() & 0x0fff);
    } while (std::popcount(static_cast<unsigned>(m)) > 3);
  }
  std::array<AnnotationRun, 3> same;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (auto& r : same) r.turns[{"c" + std::to_string(i / 4), i % 4}].labels = LabelSet::from_mask(masks[i]);
  }
  const std::array<const AnnotationRun*, 3> same_ptrs{&same[0], &same[1], &same[2]};
  const auto id = agreement_metrics(same_ptrs);
  c.expect(id.mean_f1 == 1.0 && id.mean_jaccard == 1.0 && id.exact_threeway_match_rate == 1.0,
           "identical runs below 1.0");
  for (const auto& [pair, v] : id.pairwise_f1) c.expect(v == 1.0 && id.pairwise_jaccard.at(pair) == 1.0, "pairwise below 1.0");

  // a = [{0,1},{2},{}], b = [{0},{2,3},{4}], c = a
  // F1(a,b) = 2*2/7, F1(a,c) = 1, F1(b,c) = 4/7, mean 5/7
  const std::vector<LabelMask> ra{0b11, 0b100, 0};
  const std::vector<LabelMask> rb{0b1, 0b1100, 0b10000};
  std::array<AnnotationRun, 3> eng;
  for (std::size_t t = 0; t < 3; ++t) {
    eng[0].turns[{"e", t}].labels = LabelSet::from_mask(ra[t]);
    eng[1].turns[{"e", t}].labels = LabelSet::from_mask(rb[t]);
    eng[2].turns[{"e", t}].labels = LabelSet::from_mask(ra[t]);
  }
  const std::array<const AnnotationRun*, 3> eng_ptrs{&eng[0], &eng[1], &eng[2]};
  const auto em = agreement_metrics(eng_ptrs);
  c.expect(std::abs(em.mean_f1 - 5.0 / 7.0) <= 1e-12, "engineered mean F1 " + fmt(em.mean_f1));
  c.expect(std::abs(em.pairwise_f1.at({0, 1}) - 4.0 / 7.0) <= 1e-12, "engineered F1(0,1)");
  c.expect(std::abs(em.pairwise_jaccard.at({0, 1}) - 0.4) <= 1e-12, "engineered Jaccard(0,1)");
  c.expect(em.exact_threeway_match_rate == 0.0, "engineered exact match");

  // MASI over every pair of label sets of size <= 3
  std::vector<LabelMask> small;
  for (unsigned m = 0; m < (1u << kLabelCount); ++m) {
    if (std::popcount(m) <= 3) small.push_back(static_cast<LabelMask>(m));
  }
  for (auto x : small) {
    for (auto y : small) {
      const double want = oracle::masi(oracle::to_set(x), oracle::to_set(y));
      if (std::abs(masi_similarity(x, y) - want) > 1e-12) {
        c.expect(false, "MASI mismatch at " + std::to_string(x) + "," + std::to_string(y));
      }
    }
  }
  // kappa over every pair of binary vectors up to length 6
  for (int n = 1; n <= 6; ++n) {
    for (unsigned u = 0; u < (1u << n); ++u) {
      for (unsigned v = 0; v < (1u << n); ++v) {
        std::vector<bool> a(n), b(n);
        bool aa[6], bb[6];
        for (int i = 0; i < n; ++i) {
          a[i] = aa[i] = (u >> i) & 1u;
          b[i] = bb[i] = (v >> i) & 1u;
        }
        const auto got = cohen_kappa(std::span<const bool>(aa, n), std::span<const bool>(bb, n));
        const auto want = oracle::cohen_kappa(a, b);
        const bool match = got.has_value() == want.has_value() && (!got || std::abs(*got - *want) <= 1e-12);
        if (!match) c.expect(false, "kappa mismatch n=" + std::to_string(n));
      }
    }
  }
  if (c.ok) c.detail = "engineered mean F1 " + fmt(em.mean_f1) + ", " + std::to_string(small.size() * small.size()) + " MASI pairs";
  return c;
}

// ---- live ----

Check live_direction() {
  Check c;
  const char* path = std::getenv("SSBC_LIVE_CONFIG");
  if (!path || !*path) {
    c.skipped = true;
    c.detail = "SSBC_LIVE_CONFIG not set";
    return c;
  }
  try {
    Pipeline p(load_config(path), {});
    p.run_all();
    for (const auto& r : p.store().load_records("stats", "contingency_distress")) {
      const auto res = stats::contingency_from_json(r);
      if (res.tag != SsbcLabel::teaching) continue;
      const double none = res.per_level_rates.at("none");
      const double high = res.per_level_rates.at("moderate+");
      c.expect(high < none, "teaching at moderate+ " + fmt(high) + " vs none " + fmt(none));
      if (c.ok) c.detail = "teaching " + fmt(none) + " (none) > " + fmt(high) + " (moderate+)";
      return c;
    }
    c.expect(false, "no teaching row");
  } catch (const std::exception& e) {
    c.expect(false, e.what());
  }
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"stats-oracles", stats_oracles},   {"logistic-recovery", logistic_recovery},
      {"probe-suite", probe_suite},       {"consensus-properties", consensus_suite},
      {"shard-validation", shard_validation}, {"golden-e2e", golden_e2e},
      {"agreement-metrics", agreement_suite}, {"live-direction", live_direction}};
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    const char* status = c.skipped ? "SKIP" : (c.ok ? "PASS" : "FAIL");
    if (!c.skipped && !c.ok) ++failures;
    std::cout << status << " " << name << " - " << c.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
