// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <cfloat>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "test_support.hpp"

using namespace hyperhier;
namespace ts = testsupport;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) detail = why;
    pass = pass && ok;
  }
};

std::vector<std::vector<std::string>> read_table() {
  std::ifstream csv(ts::data_dir() / "reference_table.csv");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    rows.push_back(std::move(f));
  }
  return rows;
}

char buf[512];

template <class... A>
std::string fmt(const char* f, A... a) {
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

// 1. Geometry identities on random pairs, double precision.
Verdict geometry() {
  Verdict v;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> radius(0.0, 0.99);
  auto random_point = [&](std::size_t n) {
    std::vector<double> c(n);
    double s = 0;
    for (auto& x : c) {
      x = g(rng);
      s += x * x;
    }
    const double r = radius(rng) / std::sqrt(s);
    for (auto& x : c) x *= r;
    return PoincarePoint<double>(std::move(c));
  };
  double e_id = 0, e_inv = 0, e_origin = 0, e_iso = 0;
  for (int i = 0; i < 100000; ++i) {
    const std::size_t n = 2 + rng() % 63;
    const auto a = random_point(n), x = random_point(n), y = random_point(n);
    const auto id = mobius_add(a, PoincarePoint<double>::origin(n));
    const auto inv = mobius_add(-a, a);
    for (std::size_t k = 0; k < n; ++k) {
      e_id = std::max(e_id, std::abs(id[k] - a[k]));
      e_inv = std::max(e_inv, std::abs(inv[k]));
    }
    e_origin = std::max(e_origin, std::abs(distance(PoincarePoint<double>::origin(n), a) - 2 * std::atanh(a.norm())));
    e_iso = std::max(e_iso, std::abs(distance(translate(a, x), translate(a, y)) - distance(x, y)));
  }
  v.require(e_id <= 1e-12, fmt("a+0 error %.3g", e_id));
  v.require(e_inv <= 1e-12, fmt("(-a)+a error %.3g", e_inv));
  v.require(e_origin <= 1e-12, fmt("d(0,v) error %.3g", e_origin));
  v.require(e_iso <= 1e-9, fmt("isometry error %.3g", e_iso));
  v.detail = v.pass ? fmt("max errors %.2g %.2g %.2g %.2g", e_id, e_inv, e_origin, e_iso) : v.detail;
  return v;
}

// 2. select_dimension against the recorded d column.
Verdict dimension_rule() {
  Verdict v;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per;
  for (const auto& f : read_table()) {
    auto& e = per[f[0]];
    e.first = std::max<std::size_t>(e.first, std::stoul(f[7]));
    e.second = std::stoul(f[8]);
  }
  v.require(per.size() == 16, fmt("%zu hierarchies in table", per.size()));
  for (const auto& [name, e] : per)
    v.require(select_dimension(e.first) == e.second,
              fmt("%s: delta %zu -> %zu, expected %zu", name.c_str(), e.first, select_dimension(e.first), e.second));
  for (auto [delta, d] : std::vector<std::pair<std::size_t, std::size_t>>{{26, 40}, {39, 70}, {401, 520}, {8, 20}, {107, 130}})
    v.require(select_dimension(delta) == d, fmt("delta %zu", delta));
  if (v.pass) v.detail = fmt("%zu hierarchies", per.size());
  return v;
}

// 3. Properties of every shipped fixture.
Verdict tree_properties() {
  Verdict v;
  int n = 0;
  for (const auto& f : read_table()) {
    if (f[2].empty()) continue;
    const auto p = compute_properties(ts::load_fixture(f[2]));
    const bool ok = p.num_nodes == std::stoul(f[3]) && p.num_edges == std::stoul(f[4]) && p.depth == std::stoul(f[5]) &&
                    p.num_leaves == std::stoul(f[6]) && p.max_degree == std::stoul(f[7]) &&
                    fmt("%.1f", p.avg_branching_factor) == fmt("%.1f", std::stod(f[9]));
    v.require(ok, f[2] + " differs");
    ++n;
  }
  v.require(n == 6, fmt("%d fixtures", n));
  if (v.pass) v.detail = fmt("%d fixtures", n);
  return v;
}

// 4. Batched metrics equal the naive oracle.
Verdict metrics_oracle() {
  Verdict v;
  std::mt19937_64 rng(4);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const auto h = ts::random_tree(2 + rng() % 199, rng, (rng() % 5) / 10.0);
    const auto e = ts::random_embedding(h, 2 + rng() % 10, 0.3 + (rng() % 100) / 25.0, rng, 0.95);
    const auto o = ts::naive_distortion(e, h);
    for (std::size_t b : {std::size_t{1}, std::size_t{7}, h.size()}) {
      const auto r = evaluate(e, h, b);
      // Relative once a value exceeds 1: a double near 1e4 has an ulp of ~2e-12.
      const double scale_avg = std::max(1.0, static_cast<double>(o.d_avg));
      const double scale_wc = std::max(1.0, static_cast<double>(o.d_wc));
      worst = std::max({worst, std::abs(r.d_avg - static_cast<double>(o.d_avg)) / scale_avg,
                        std::abs(r.d_wc - static_cast<double>(o.d_wc)) / scale_wc});
    }
  }
  v.require(worst <= 1e-12, fmt("max deviation %.3g", worst));
  if (v.pass) v.detail = fmt("max deviation %.2g", worst);
  return v;
}

// 5. Edge lengths and injectivity of both constructions.
Verdict construction() {
  Verdict v;
  std::mt19937_64 rng(5);
  double edge_err = 0, min_sep = INFINITY;
  for (int t = 0; t < 50; ++t) {
    const auto h = ts::random_tree(2 + rng() % 499, rng, (rng() % 6) / 10.0);
    const auto p = compute_properties(h);
    const auto cfg = EmbeddingConfig::for_tree(p.depth, p.max_degree);
    for (auto s : {Strategy::Hadamard, Strategy::OptimizedUniform}) {
      const auto e = embed(h, cfg, s, t);
      for (NodeId u = 1; u < h.size(); ++u)
        edge_err = std::max(edge_err, std::abs(static_cast<double>(ts::acosh_distance(e.points[u], e.points[h.parent(u)])) - cfg.tau));
      for (NodeId a = 0; a < h.size(); ++a)
        for (NodeId b = a + 1; b < h.size(); ++b)
          min_sep = std::min(min_sep, static_cast<double>(distance(e.points[a], e.points[b])));
    }
  }
  v.require(edge_err <= 1e-6, fmt("edge error %.3g", edge_err));
  v.require(min_sep >= 1e-6, fmt("closest pair %.3g", min_sep));
  if (v.pass) v.detail = fmt("max edge error %.2g, closest pair %.3g", edge_err, min_sep);
  return v;
}

// 6. Recorded distortion of the Pizza and Core50 fixtures.
Verdict recorded_distortion() {
  Verdict v;
  auto run = [](const char* file, std::size_t dim) {
    const auto h = ts::load_fixture(file);
    const auto p = compute_properties(h);
    return evaluate(embed(h, EmbeddingConfig::for_tree(p.depth, p.max_degree, DBL_EPSILON, dim), Strategy::Hadamard), h, 64);
  };
  const auto pizza = run("pizza.txt", 70);
  const auto core = run("core50.txt", 10);
  v.require(std::abs(pizza.d_avg - 0.126) <= 0.02, fmt("pizza D_avg %.4f", pizza.d_avg));
  v.require(std::abs(pizza.d_wc - 1.180) <= 0.05, fmt("pizza D_wc %.4f", pizza.d_wc));
  v.require(std::abs(core.d_avg - 0.075) <= 0.02, fmt("core50 D_avg %.4f", core.d_avg));
  v.detail = fmt("pizza D_avg %.4f D_wc %.4f, core50 D_avg %.4f", pizza.d_avg, pizza.d_wc, core.d_avg);
  return v;
}

// 7. Heuristic flattening of deep-chain trees.
Verdict restructuring_direction() {
  Verdict v;
  std::mt19937_64 rng(7);
  const auto dir = ts::temp_dir("acceptance7");
  int improved = 0;
  const int total = 30;
  for (int t = 0; t < total; ++t) {
    const auto h = ts::deep_chain_tree(rng);
    const auto r = heuristic_restructure(h, RecommendationSet::parse("r1"));
    v.require(compute_properties(r.tree).depth < compute_properties(h).depth, fmt("tree %d depth not reduced", t));
    v.require(validate_candidate(h, serialize_text(r.tree)).leaves_retained, fmt("tree %d lost a leaf", t));
    const auto a = dir / fmt("t%d.txt", t), b = dir / fmt("t%d_flat.txt", t);
    write_file(a, serialize_text(h));
    write_file(b, serialize_text(r.tree));
    const auto c = cmd_compare(a, b, {}, dir);
    improved += c.rows[1].report.d_avg < c.rows[0].report.d_avg;
  }
  v.require(improved * 10 >= total * 9, fmt("D_avg decreased for %d/%d", improved, total));
  if (v.pass) v.detail = fmt("D_avg decreased for %d/%d", improved, total);
  return v;
}

// 8. Each single-criterion failure flips exactly one flag.
Verdict validation_gate() {
  Verdict v;
  const auto h = parse_text("r\n  a\n    b\n    c\n  d\n");
  struct Case {
    const char* text;
    int failing;
  };
  const Case cases[] = {{"r\n  a\n    b\n    c\n  d\n", 1},
                        {"r\n  b\n  d\n", 2},
                        {"r\n  b\n  c\n  zzz\n    d\n", 3},
                        {"r\n  b\n   c\n  d\n", 4}};
  for (const auto& c : cases) {
    const auto rep = validate_candidate(h, c.text);
    v.require(rep.failed_criteria() == std::vector<int>{c.failing}, fmt("case for criterion %d", c.failing));
  }
  if (v.pass) v.detail = "4 cases";
  return v;
}

// 9. Repair loop against the scripted mock.
Verdict gateway_loop() {
  Verdict v;
  ts::ScopedKey key;
  const char* original = "r\n  a\n    b\n    c\n  d\n";
  const auto h = parse_text(original);
  const std::string good = "Flattened a.\n```\nr\n  b\n  c\n  d\n```\n";
  {
    ts::MockLlmServer mock({{200, good}});
    const auto s = restructure_session(mock.config(), h, RecommendationSet::all());
    v.require(s.outcome.passed() && s.outcome.follow_ups == 0 && s.outcome.restarts == 0 && s.transcript.turns.size() == 2,
              "immediate pass");
  }
  {
    ts::MockLlmServer mock({{200, "```\nr\n  b\n  d\n```"}, {200, good}});
    const auto s = restructure_session(mock.config(), h, RecommendationSet::all());
    v.require(s.outcome.passed() && s.outcome.follow_ups == 1 && s.outcome.restarts == 0 && s.transcript.turns.size() == 4 &&
                  s.transcript.turns[2].content.find("c") != std::string::npos,
              "one follow-up");
  }
  {
    ts::MockLlmServer mock({{200, std::string("```\n") + original + "```"}});
    auto cfg = mock.config();
    bool exhausted = false;
    try {
      restructure_session(cfg, h, RecommendationSet::all());
    } catch (const ExhaustedAttemptsError& e) {
      const auto replies = e.transcript().count("assistant");
      exhausted = replies - 1 == cfg.max_follow_ups + cfg.max_restarts * (cfg.max_follow_ups + 1) &&
                  e.transcript().turns.size() == 2 * replies && mock.request_count() == replies;
    }
    v.require(exhausted, "exhaustion count");
  }
  if (v.pass) v.detail = "pass / repair / exhaustion";
  return v;
}

// 10. Ablation grid shape and baseline consistency.
Verdict ablation() {
  Verdict v;
  const auto dir = ts::temp_dir("acceptance10");
  const auto input = ts::data_dir() / "hierarchies" / "pascalvoc.txt";
  AblationOptions o;
  const auto rows = cmd_ablate(input, o, dir);
  const std::vector<std::string> expected{"baseline", "r1", "r2", "r3", "r1,r2,r3", "r2,r3,r4", "r1,r2,r3,r4"};
  v.require(rows.size() == 7 * o.strategies.size(), fmt("%zu rows", rows.size()));
  for (std::size_t s = 0; s < o.strategies.size() && v.pass; ++s)
    for (std::size_t i = 0; i < 7; ++i) v.require(rows[7 * s + i].subset == expected[i], "subset order");
  if (!v.pass) return v;
  for (std::size_t s = 0; s < o.strategies.size(); ++s) {
    EmbedOptions eo;
    eo.strategy = o.strategies[s];
    const auto e = cmd_embed(input, eo, dir);
    const auto ev = cmd_evaluate(input, e.embedding_file, o.batch_rows, dir);
    v.require(rows[7 * s].report->d_avg == ev.report.d_avg && rows[7 * s].report->d_wc == ev.report.d_wc, "baseline differs");
  }
  v.require(rows[3].status == "no transformation", "r3 row not flagged");
  if (v.pass) v.detail = fmt("%zu rows", rows.size());
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "geometry identities", geometry},
      {2, "dimension rule golden", dimension_rule},
      {3, "tree-property golden", tree_properties},
      {4, "metrics oracle", metrics_oracle},
      {5, "construction contract", construction},
      {6, "reported distortion (data-dependent)", recorded_distortion},
      {7, "restructuring direction", restructuring_direction},
      {8, "validation gate", validation_gate},
      {9, "gateway repair loop", gateway_loop},
      {10, "ablation harness", ablation},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d [PRIMARY] %-38s %s  (%s; %.2fs)\n", c.id, c.name, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
