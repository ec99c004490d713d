#include "dynconn/bsl.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "dynconn/error.hpp"
#include "dynconn/seed.hpp"

namespace dynconn::bsl {

namespace {

constexpr double kImprovementTol = 1e-9;
constexpr std::size_t kMaxNodes = 64;
constexpr std::size_t kMaxTableCells = std::size_t{1} << 26;

std::uint64_t parent_mask(std::span<const std::size_t> parents) {
  std::uint64_t mask = 0;
  for (auto p : parents) mask |= std::uint64_t{1} << p;
  return mask;
}

std::vector<std::size_t> with(std::vector<std::size_t> set, std::size_t x) {
  set.insert(std::upper_bound(set.begin(), set.end(), x), x);
  return set;
}

std::vector<std::size_t> without(std::vector<std::size_t> set, std::size_t x) {
  set.erase(std::remove(set.begin(), set.end(), x), set.end());
  return set;
}

// Connected-component label per node of the undirected skeleton.
std::vector<std::size_t> component_labels(const Dag& g) {
  const std::size_t n = g.n_nodes();
  std::vector<std::size_t> label(n, n);
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (auto u : g.parents(v)) {
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
  }
  std::size_t next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] != n) continue;
    std::vector<std::size_t> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (auto w : adj[u]) {
        if (label[w] == n) {
          label[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return label;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dag

bool Dag::has_edge(std::size_t from, std::size_t to) const {
  const auto& pa = parents_[to];
  return std::binary_search(pa.begin(), pa.end(), from);
}

std::size_t Dag::edge_count() const {
  std::size_t e = 0;
  for (const auto& pa : parents_) e += pa.size();
  return e;
}

void Dag::add_edge(std::size_t from, std::size_t to) {
  if (from >= n_nodes() || to >= n_nodes() || from == to) {
    throw Error(ErrorCode::InvalidArgument, "invalid edge");
  }
  if (!has_edge(from, to)) parents_[to] = with(std::move(parents_[to]), from);
}

void Dag::remove_edge(std::size_t from, std::size_t to) {
  parents_[to] = without(std::move(parents_[to]), from);
}

bool Dag::has_path(std::size_t from, std::size_t to) const {
  // Walk parents backwards from `to`.
  std::vector<char> seen(n_nodes(), 0);
  std::vector<std::size_t> stack{to};
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    for (auto p : parents_[v]) {
      if (p == from) return true;
      if (!seen[p]) {
        seen[p] = 1;
        stack.push_back(p);
      }
    }
  }
  return false;
}

bool Dag::is_acyclic() const {
  const std::size_t n = n_nodes();
  std::vector<std::size_t> remaining(n);
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t v = 0; v < n; ++v) {
    remaining[v] = parents_[v].size();
    for (auto p : parents_[v]) {
      if (p == v) return false;
      children[p].push_back(v);
    }
  }
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v) {
    if (remaining[v] == 0) ready.push_back(v);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    auto v = ready.back();
    ready.pop_back();
    ++visited;
    for (auto c : children[v]) {
      if (--remaining[c] == 0) ready.push_back(c);
    }
  }
  return visited == n;
}

std::size_t Dag::max_in_degree() const {
  std::size_t d = 0;
  for (const auto& pa : parents_) d = std::max(d, pa.size());
  return d;
}

void ScoreParams::check() const {
  if (!(ess > 0.0) || !std::isfinite(ess)) throw Error(ErrorCode::InvalidArgument, "ess must be positive");
  if (n_bins < 2 || n_bins > 5) throw Error(ErrorCode::InvalidArgument, "n_bins must be in [2, 5]");
  if (max_parents < 1) throw Error(ErrorCode::InvalidArgument, "max_parents must be >= 1");
}

void SearchConfig::check() const {
  if (restarts < 1) throw Error(ErrorCode::InvalidArgument, "restarts must be >= 1");
  if (patience_sweeps < 1) throw Error(ErrorCode::InvalidArgument, "patience must be >= 1");
  if (max_sweeps < 1) throw Error(ErrorCode::InvalidArgument, "max_sweeps must be >= 1");
  if (!(init_edge_prob >= 0.0 && init_edge_prob <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "init_edge_prob must be in [0, 1]");
  }
}

std::uint64_t CountTable::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

// ---------------------------------------------------------------------------
// Discretization and scoring

QuantizedWindow quantize(const Recording& window, int n_bins) {
  if (n_bins < 2 || n_bins > 5) throw Error(ErrorCode::InvalidArgument, "n_bins must be in [2, 5]");
  const std::size_t nc = window.n_channels();
  const std::size_t m = window.n_samples();
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "empty window");

  QuantizedWindow qw;
  qw.n_channels = nc;
  qw.n_samples = m;
  qw.n_bins = n_bins;
  qw.data.assign(nc * m, 0);

  std::vector<double> sorted(m);
  std::vector<double> thresholds(static_cast<std::size_t>(n_bins));
  for (std::size_t c = 0; c < nc; ++c) {
    const double* row = window.samples.row(static_cast<Eigen::Index>(c)).data();
    std::copy(row, row + m, sorted.begin());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) continue;  // constant channel -> bin 0
    // Linearly interpolated empirical quantiles at b / r.
    for (int b = 0; b < n_bins; ++b) {
      const double pos = static_cast<double>(b) / n_bins * static_cast<double>(m - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const double frac = pos - static_cast<double>(lo);
      const double hi_val = lo + 1 < m ? sorted[lo + 1] : sorted[lo];
      thresholds[static_cast<std::size_t>(b)] = sorted[lo] + frac * (hi_val - sorted[lo]);
    }
    for (std::size_t t = 0; t < m; ++t) {
      int bin = 0;
      for (int b = n_bins - 1; b > 0; --b) {
        if (row[t] >= thresholds[static_cast<std::size_t>(b)]) {
          bin = b;
          break;
        }
      }
      qw.data[c * m + t] = static_cast<std::uint8_t>(bin);
    }
  }
  return qw;
}

CountTable family_counts(const QuantizedWindow& qw, std::size_t node, std::span<const std::size_t> parents) {
  if (node >= qw.n_channels) throw Error(ErrorCode::InvalidArgument, "node out of range");
  const auto r = static_cast<std::size_t>(qw.n_bins);
  std::size_t q = 1;
  for (auto p : parents) {
    if (p == node || p >= qw.n_channels) throw Error(ErrorCode::InvalidArgument, "invalid parent");
    q *= r;
    if (q * r > kMaxTableCells) throw Error(ErrorCode::InvalidArgument, "parent set too large");
  }
  CountTable ct;
  ct.node = node;
  ct.parent_config_count = q;
  ct.n_bins = qw.n_bins;
  ct.counts.assign(q * r, 0);
  const auto child = qw.row(node);
  for (std::size_t t = 0; t < qw.n_samples; ++t) {
    std::size_t config = 0;
    for (auto p : parents) config = config * r + qw.at(p, t);
    ++ct.counts[config * r + child[t]];
  }
  return ct;
}

double family_score(const CountTable& ct, const ScoreParams& params, std::uint64_t m) {
  const auto r = static_cast<std::size_t>(ct.n_bins);
  const auto q = ct.parent_config_count;
  double score = 0.0;
  if (params.kind == ScoreKind::Bdeu) {
    const double a_j = params.ess / static_cast<double>(q);
    const double a_jk = a_j / static_cast<double>(r);
    const double lg_aj = std::lgamma(a_j);
    const double lg_ajk = std::lgamma(a_jk);
    for (std::size_t j = 0; j < q; ++j) {
      std::uint64_t n_j = 0;
      double inner = 0.0;
      for (std::size_t k = 0; k < r; ++k) {
        const auto n_jk = ct.counts[j * r + k];
        if (n_jk == 0) continue;
        n_j += n_jk;
        inner += std::lgamma(a_jk + static_cast<double>(n_jk)) - lg_ajk;
      }
      if (n_j == 0) continue;
      score += lg_aj - std::lgamma(a_j + static_cast<double>(n_j)) + inner;
    }
  } else {
    for (std::size_t j = 0; j < q; ++j) {
      std::uint64_t n_j = 0;
      for (std::size_t k = 0; k < r; ++k) n_j += ct.counts[j * r + k];
      if (n_j == 0) continue;
      for (std::size_t k = 0; k < r; ++k) {
        const auto n_jk = ct.counts[j * r + k];
        if (n_jk == 0) continue;
        score += static_cast<double>(n_jk) * std::log(static_cast<double>(n_jk) / static_cast<double>(n_j));
      }
    }
    if (m > 0) {
      score -= static_cast<double>(q * (r - 1)) / 2.0 * std::log(static_cast<double>(m));
    }
  }
  if (!std::isfinite(score)) throw Error(ErrorCode::NonFiniteScore, "family score is not finite");
  return score;
}

double graph_score(const QuantizedWindow& qw, const Dag& g, const ScoreParams& params) {
  double total = 0.0;
  for (std::size_t v = 0; v < g.n_nodes(); ++v) {
    total += family_score(family_counts(qw, v, g.parents(v)), params, qw.n_samples);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Cache

std::size_t FamilyScoreCache::KeyHash::operator()(const Key& k) const noexcept {
  return static_cast<std::size_t>(mix64(k.parent_mask ^ (std::uint64_t{k.node} << 58) ^ k.node));
}

FamilyScoreCache::FamilyScoreCache(const QuantizedWindow& qw, const ScoreParams& params)
    : qw_(qw), params_(params) {
  params_.check();
  if (qw.n_channels > kMaxNodes) throw Error(ErrorCode::InvalidArgument, "at most 64 channels supported");
  if (qw.n_bins != params.n_bins) throw Error(ErrorCode::InvalidArgument, "n_bins mismatch between window and params");
}

double FamilyScoreCache::score(std::size_t node, std::span<const std::size_t> parents) {
  const Key key{parent_mask(parents), node};
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  ++misses_;
  // Parent order only permutes table rows, so sorted order is canonical.
  std::vector<std::size_t> sorted(parents.begin(), parents.end());
  std::sort(sorted.begin(), sorted.end());
  const double s = family_score(family_counts(qw_, node, sorted), params_, qw_.n_samples);
  cache_.emplace(key, s);
  return s;
}

double FamilyScoreCache::graph_score(const Dag& g) {
  double total = 0.0;
  for (std::size_t v = 0; v < g.n_nodes(); ++v) total += score(v, g.parents(v));
  return total;
}

// ---------------------------------------------------------------------------
// Search

Dag random_dag(std::size_t n, double init_edge_prob, std::uint64_t seed, int max_parents) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "random_dag needs n >= 2");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::bernoulli_distribution coin(init_edge_prob);
  Dag g(n);
  for (std::size_t j = 1; j < n; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      // Always draw so the stream does not depend on truncation.
      const bool take = coin(rng);
      if (take && g.parents(order[j]).size() < static_cast<std::size_t>(max_parents)) {
        g.add_edge(order[i], order[j]);
      }
    }
  }
  return g;
}

namespace {

enum class MoveKind { None, Add, Delete, Reverse };

struct Move {
  MoveKind kind = MoveKind::None;
  std::size_t from = 0;
  std::size_t to = 0;
  double delta = 0.0;
};

}  // namespace

SearchResult climb(FamilyScoreCache& cache, Dag g, const ScoreParams& params, const SearchConfig& cfg) {
  const std::size_t n = g.n_nodes();
  const auto max_pa = static_cast<std::size_t>(params.max_parents);
  if (!g.is_acyclic() || g.max_in_degree() > max_pa) {
    throw Error(ErrorCode::InvalidArgument, "start graph must be acyclic and respect max_parents");
  }

  std::vector<double> family(n);
  for (std::size_t v = 0; v < n; ++v) family[v] = cache.score(v, g.parents(v));
  double current = std::accumulate(family.begin(), family.end(), 0.0);

  SearchResult result;
  int stale = 0;
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    Move best;
    auto consider = [&](MoveKind kind, std::size_t from, std::size_t to, double delta) {
      if (delta > best.delta) best = {kind, from, to, delta};
    };

    for (std::size_t to = 0; to < n; ++to) {
      const auto& pa_to = g.parents(to);
      for (std::size_t from = 0; from < n; ++from) {
        if (from == to) continue;
        if (g.has_edge(from, to)) {
          const auto reduced = without(pa_to, from);
          const double del_to = cache.score(to, reduced) - family[to];
          consider(MoveKind::Delete, from, to, del_to);
          if (cfg.allow_reversal && g.parents(from).size() < max_pa) {
            Dag probe = g;
            probe.remove_edge(from, to);
            if (!probe.has_path(from, to)) {
              const double add_from = cache.score(from, with(g.parents(from), to)) - family[from];
              consider(MoveKind::Reverse, from, to, del_to + add_from);
            }
          }
        } else if (pa_to.size() < max_pa && !g.has_path(to, from)) {
          consider(MoveKind::Add, from, to, cache.score(to, with(pa_to, from)) - family[to]);
        }
      }
    }

    if (best.kind != MoveKind::None && best.delta > kImprovementTol) {
      switch (best.kind) {
        case MoveKind::Add: g.add_edge(best.from, best.to); break;
        case MoveKind::Delete: g.remove_edge(best.from, best.to); break;
        case MoveKind::Reverse:
          g.remove_edge(best.from, best.to);
          g.add_edge(best.to, best.from);
          break;
        case MoveKind::None: break;
      }
      family[best.to] = cache.score(best.to, g.parents(best.to));
      family[best.from] = cache.score(best.from, g.parents(best.from));
      current = std::accumulate(family.begin(), family.end(), 0.0);
      stale = 0;
    } else {
      ++stale;
    }
    result.trace.push_back(current);
    if (stale >= cfg.patience_sweeps) break;
  }
  result.dag = std::move(g);
  result.score = current;
  return result;
}

SearchResult hill_climb(const QuantizedWindow& qw, const ScoreParams& params, const SearchConfig& cfg) {
  cfg.check();
  FamilyScoreCache cache(qw, params);
  std::optional<SearchResult> best;
  for (int i = 0; i < cfg.restarts; ++i) {
    auto start = random_dag(qw.n_channels, cfg.init_edge_prob,
                            derive_seed(cfg.seed, "init", static_cast<std::uint64_t>(i)), params.max_parents);
    auto res = climb(cache, std::move(start), params, cfg);
    if (!best || res.score > best->score) best = std::move(res);
  }
  return std::move(*best);
}

bool is_weakly_connected(const Dag& g) {
  const std::size_t n = g.n_nodes();
  if (n == 0) return true;
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (auto u : g.parents(v)) {
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
  }
  // Depth-first search from node 0.
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    for (auto w : adj[u]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
    }
  }
  return reached == n;
}

void connect_components(FamilyScoreCache& cache, Dag& g, const ScoreParams& params) {
  const auto max_pa = static_cast<std::size_t>(params.max_parents);
  while (!is_weakly_connected(g)) {
    const auto label = component_labels(g);
    std::optional<Move> best;
    for (std::size_t to = 0; to < g.n_nodes(); ++to) {
      if (g.parents(to).size() >= max_pa) continue;
      const double base = cache.score(to, g.parents(to));
      for (std::size_t from = 0; from < g.n_nodes(); ++from) {
        if (label[from] == label[to]) continue;
        // Edges between components can never close a cycle.
        const double delta = cache.score(to, with(g.parents(to), from)) - base;
        if (!best || delta > best->delta) best = Move{MoveKind::Add, from, to, delta};
      }
    }
    if (!best) throw Error(ErrorCode::InvalidArgument, "cannot connect components under max_parents");
    g.add_edge(best->from, best->to);
  }
}

// Edges forced in to connect the skeleton can have a negative deletion delta;
// they keep this weight so the thresholded-at-zero skeleton stays connected.
constexpr double kPresentEdgeFloor = 1e-12;

ConnectivityMatrix edge_strengths(const QuantizedWindow& qw, const Dag& g, const ScoreParams& params,
                                  std::vector<std::string> channel_names) {
  FamilyScoreCache cache(qw, params);
  const std::size_t n = g.n_nodes();
  ConnectivityMatrix cm;
  cm.channel_names = channel_names.empty() ? default_channel_names(n) : std::move(channel_names);
  cm.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t v = 0; v < n; ++v) {
    const auto& pa = g.parents(v);
    const double full = cache.score(v, pa);
    for (auto u : pa) {
      const double w = std::max(kPresentEdgeFloor, full - cache.score(v, without(pa, u)));
      cm.weights(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = w;
      cm.weights(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) = w;
    }
  }
  cm.score = cache.graph_score(g);
  return cm;
}

ConnectivityMatrix estimate_window(const Recording& window, const ScoreParams& params, const SearchConfig& cfg) {
  cfg.check();
  params.check();
  const auto qw = quantize(window, params.n_bins);
  FamilyScoreCache cache(qw, params);

  std::optional<SearchResult> best_connected;
  std::optional<SearchResult> best_any;
  for (int i = 0; i < cfg.restarts; ++i) {
    auto start = random_dag(qw.n_channels, cfg.init_edge_prob,
                            derive_seed(cfg.seed, "init", static_cast<std::uint64_t>(i)), params.max_parents);
    auto res = climb(cache, std::move(start), params, cfg);
    if (is_weakly_connected(res.dag)) {
      if (!best_connected || res.score > best_connected->score) best_connected = res;
    }
    if (!best_any || res.score > best_any->score) best_any = std::move(res);
  }
  Dag g = best_connected ? best_connected->dag : best_any->dag;
  if (!best_connected) connect_components(cache, g, params);
  return edge_strengths(qw, g, params, window.channel_names);
}

DynamicConnectivity estimate_dynamic_prefiltered(const Recording& filtered, const BandSpec& band,
                                                 const WindowPlan& plan, const ScoreParams& params,
                                                 const SearchConfig& cfg, unsigned threads) {
  const auto windows = slice_windows(filtered, plan);
  DynamicConnectivity out;
  out.method = "bsl";
  out.band = band;
  out.window_plan = plan;
  out.slices.resize(windows.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < windows.size(); k = next++) {
      try {
        SearchConfig local = cfg;
        local.seed = derive_seed(cfg.seed, "window", k);
        out.slices[k] = estimate_window(windows[k], params, local);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(windows.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

DynamicConnectivity estimate_dynamic(const Recording& r, const BandSpec& band, const WindowPlan& plan,
                                     const ScoreParams& params, const SearchConfig& cfg, unsigned threads) {
  return estimate_dynamic_prefiltered(bandpass(r, band), band, plan, params, cfg, threads);
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration

std::vector<Dag> enumerate_dags(std::size_t n, int max_parents) {
  if (n < 1 || n > 5) throw Error(ErrorCode::InvalidArgument, "enumeration supports 1..5 nodes");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  // Each unordered pair is absent, i->j or j->i.
  std::size_t total = 1;
  for (std::size_t i = 0; i < pairs.size(); ++i) total *= 3;
  std::vector<Dag> out;
  for (std::size_t code = 0; code < total; ++code) {
    Dag g(n);
    std::size_t c = code;
    for (const auto& [i, j] : pairs) {
      const auto state = c % 3;
      c /= 3;
      if (state == 1) g.add_edge(i, j);
      if (state == 2) g.add_edge(j, i);
    }
    if (g.max_in_degree() <= static_cast<std::size_t>(max_parents) && g.is_acyclic()) out.push_back(std::move(g));
  }
  return out;
}

SearchResult exhaustive_search(const QuantizedWindow& qw, const ScoreParams& params) {
  FamilyScoreCache cache(qw, params);
  SearchResult best;
  bool first = true;
  for (auto& g : enumerate_dags(qw.n_channels, params.max_parents)) {
    const double s = cache.graph_score(g);
    if (first || s > best.score) {
      best.dag = std::move(g);
      best.score = s;
      first = false;
    }
  }
  return best;
}

}  // namespace dynconn::bsl
