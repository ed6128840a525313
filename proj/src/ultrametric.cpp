#include "smallball/ultrametric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>

#include "json.hpp"

namespace smallball {

namespace {

// Uniform 32-bit words from the shared counter generator, for the randomized
// invariant checks and the dendrogram fixture.
class WordStream {
 public:
  explicit WordStream(SeedSpec seed)
      : key_{static_cast<std::uint32_t>(seed.master_seed),
             static_cast<std::uint32_t>(seed.master_seed >> 32)},
        hi_(seed.stream_id) {}

  std::uint32_t next() {
    if (lane_ == 0) {
      block_ = philox4x32_10({static_cast<std::uint32_t>(counter_),
                              static_cast<std::uint32_t>(counter_ >> 32),
                              static_cast<std::uint32_t>(hi_),
                              static_cast<std::uint32_t>(hi_ >> 32)},
                             key_);
      ++counter_;
    }
    const std::uint32_t w = block_[lane_];
    lane_ = (lane_ + 1) & 3;
    return w;
  }

  std::size_t below(std::size_t n) {
    return std::min<std::size_t>(n - 1, static_cast<std::size_t>(
                                            (next() / 4294967296.0) * static_cast<double>(n)));
  }

  double uniform01() { return (next() + 0.5) / 4294967296.0; }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t hi_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int lane_ = 0;
};

// Deepest level where the theta chains of two points agree. Valid once chain
// compatibility holds (agreement is then prefix-closed).
std::size_t point_split_level(const UltrametricTree& t, std::size_t a, std::size_t b) {
  for (std::size_t lv = t.depth() + 1; lv-- > 0;)
    if (t.theta[lv][a] == t.theta[lv][b]) return lv;
  throw std::logic_error("points disagree even at the root level");
}

void verify_tree(const UltrametricTree& t, const FiniteMetricSpace& space) {
  const std::size_t n = space.n;
  const std::size_t depth = t.depth();

  // Chain compatibility of the nearest-center maps.
  for (std::size_t lv = 1; lv <= depth; ++lv)
    for (std::size_t p = 0; p < n; ++p)
      if (t.theta[lv - 1][p] != t.parent[lv][t.theta[lv][p]])
        throw std::logic_error("center chains are not projectively compatible");

  // Every point within its level radius.
  for (std::size_t lv = 0; lv <= depth; ++lv)
    for (std::size_t p = 0; p < n; ++p)
      if (space.dist(p, t.levels[lv][t.theta[lv][p]]) > t.eps(lv) * (1.0 + 1e-12))
        throw std::logic_error("a point escapes its level radius");

  std::vector<std::size_t> nu(n * n, 0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b < n; ++b) {
      const std::size_t v = point_split_level(t, a, b);
      nu[a * n + b] = v;
      nu[b * n + a] = v;
    }

  // Strong triangle inequality for the tree metric, in integer form:
  // split(a,c) >= min(split(a,b), split(b,c)).
  auto check_triple = [&](std::size_t a, std::size_t b, std::size_t c) {
    if (nu[a * n + c] < std::min(nu[a * n + b], nu[b * n + c]))
      throw std::logic_error("tree metric violates the strong triangle inequality");
  };
  if (n <= 256) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < n; ++c) check_triple(a, b, c);
  } else {
    WordStream ws({20260823, 1});
    for (int i = 0; i < 20000; ++i) check_triple(ws.below(n), ws.below(n), ws.below(n));
  }

  // Embedding sandwich against the input metric.
  auto check_pair = [&](std::size_t a, std::size_t b) {
    if (a == b) return;
    const double d = space.dist(a, b);
    const std::size_t v = nu[a * n + b];
    if (v == depth) {
      if (d > t.eps(depth) * (1.0 + 1e-12))
        throw std::logic_error(
            "points sharing every center exceed the deepest radius -- input is not ultrametric");
      return;
    }
    if (d > t.eps(v) * (1.0 + 1e-12))
      throw std::logic_error(
          "pair exceeds its shared-ball radius -- input is not ultrametric");
    if (0.5 * t.eps(v) > d * (1.0 + 1e-12))
      throw std::logic_error(
          "separated pair closer than half its tree distance -- input is not ultrametric");
  };
  if (n <= 1024) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) check_pair(a, b);
  } else {
    WordStream ws({20260823, 2});
    for (int i = 0; i < 20000; ++i) check_pair(ws.below(n), ws.below(n));
  }
}

}  // namespace

double UltrametricTree::eps(std::size_t n) const {
  return std::ldexp(diameter, -static_cast<int>(n));
}

std::size_t UltrametricTree::ancestor(std::size_t leaf, std::size_t n) const {
  std::size_t j = leaf;
  for (std::size_t lv = depth(); lv > n; --lv) j = parent[lv][j];
  return j;
}

std::size_t UltrametricTree::split_level(std::size_t leaf_a, std::size_t leaf_b) const {
  std::size_t a = leaf_a;
  std::size_t b = leaf_b;
  for (std::size_t lv = depth() + 1; lv-- > 0;) {
    if (a == b) return lv;
    if (lv > 0) {
      a = parent[lv][a];
      b = parent[lv][b];
    }
  }
  throw std::logic_error("leaves disagree even at the root level");
}

double UltrametricTree::delta(std::size_t point_a, std::size_t point_b) const {
  const std::size_t v = point_split_level(*this, point_a, point_b);
  return v == depth() ? 0.0 : eps(v);
}

UltrametricTree build_ultrametric_tree(const FiniteMetricSpace& space, std::size_t depth) {
  if (space.n == 0) throw std::domain_error("space must be nonempty");
  if (space.n > (std::size_t{1} << 12))
    throw std::domain_error("at most 2^12 points are supported");
  if (depth < 1 || depth > 40) throw std::domain_error("depth must lie in [1, 40]");

  UltrametricTree t;
  t.diameter = space.diameter();
  const std::size_t n = space.n;
  t.levels.resize(depth + 1);
  t.parent.resize(depth + 1);
  t.theta.assign(depth + 1, std::vector<std::size_t>(n, 0));

  if (t.diameter == 0.0) {
    for (std::size_t lv = 0; lv <= depth; ++lv) {
      t.levels[lv] = {0};
      if (lv > 0) t.parent[lv] = {0};
    }
    t.first_non_splitting_level = 1;
    t.resolved = true;
    return t;
  }

  for (std::size_t lv = 0; lv <= depth; ++lv) {
    t.levels[lv] = greedy_cover(space, t.eps(lv), CoverMode::kFirstPoint).centers;
    if (lv > 0 && t.levels[lv].size() < t.levels[lv - 1].size())
      throw std::logic_error("cover counts shrank at a finer radius");
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < t.levels[lv].size(); ++j) {
        const double dj = space.dist(p, t.levels[lv][j]);
        if (dj < best_d) {
          best_d = dj;
          best = j;
        }
      }
      t.theta[lv][p] = best;
    }
    if (lv > 0) {
      t.parent[lv].resize(t.levels[lv].size());
      for (std::size_t j = 0; j < t.levels[lv].size(); ++j)
        t.parent[lv][j] = t.theta[lv - 1][t.levels[lv][j]];
    }
  }

  t.first_non_splitting_level = t.levels.size();
  for (std::size_t lv = 1; lv <= depth; ++lv)
    if (t.levels[lv].size() == t.levels[lv - 1].size()) {
      t.first_non_splitting_level = lv;
      break;
    }

  t.resolved = true;
  for (std::size_t a = 0; a < n && t.resolved; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (t.theta[depth][a] == t.theta[depth][b] && space.dist(a, b) > 0.0) {
        t.resolved = false;
        break;
      }

  verify_tree(t, space);
  return t;
}

double z_covariance(const UltrametricTree& tree, std::size_t leaf_a, std::size_t leaf_b) {
  if (leaf_a >= tree.n_leaves() || leaf_b >= tree.n_leaves())
    throw std::domain_error("leaf index out of range");
  const std::size_t v = tree.split_level(leaf_a, leaf_b);
  double acc = 0.0;
  for (std::size_t m = 0; m <= v; ++m) acc += tree.eps(m) * tree.eps(m);
  return acc;
}

double z_distance(const UltrametricTree& tree, std::size_t leaf_a, std::size_t leaf_b) {
  if (leaf_a >= tree.n_leaves() || leaf_b >= tree.n_leaves())
    throw std::domain_error("leaf index out of range");
  if (leaf_a == leaf_b) return 0.0;
  const std::size_t v = tree.split_level(leaf_a, leaf_b);
  double acc = 0.0;
  for (std::size_t m = v + 1; m <= tree.depth(); ++m) acc += tree.eps(m) * tree.eps(m);
  return std::sqrt(2.0 * acc);
}

ZRatioReport z_ratio_report(const UltrametricTree& tree) {
  ZRatioReport out;
  const std::size_t nl = tree.n_leaves();
  const std::size_t depth = tree.depth();
  out.ratio_by_level.assign(depth + 1, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> lo(depth + 1, std::numeric_limits<double>::infinity());
  std::vector<double> hi(depth + 1, -std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < nl; ++a)
    for (std::size_t b = a + 1; b < nl; ++b) {
      const std::size_t v = tree.split_level(a, b);
      const double r = z_distance(tree, a, b) / tree.eps(v);
      lo[v] = std::min(lo[v], r);
      hi[v] = std::max(hi[v], r);
      out.ratio_by_level[v] = r;
    }
  for (std::size_t v = 0; v <= depth; ++v)
    if (hi[v] >= lo[v]) out.max_spread = std::max(out.max_spread, hi[v] - lo[v]);
  return out;
}

ZUpperBound z_small_ball_upper(const UltrametricTree& tree, double epsilon) {
  if (!(epsilon > 0.0) || epsilon > tree.diameter * (1.0 + 1e-12))
    throw std::domain_error("epsilon must lie in (0, diameter]");
  const std::size_t depth = tree.depth();
  std::size_t n = 0;
  while (n < depth && tree.eps(n + 1) >= epsilon) ++n;

  ZUpperBound out;
  out.level = n;
  if (n == 0) return out;  // no parents yet: vacuous bound

  double var = 0.0;
  for (std::size_t m = n; m <= depth; ++m) var += tree.eps(m) * tree.eps(m);
  var *= 2.0;
  out.pair_sigma = std::sqrt(var);

  // Smallest descendant leaf of each level-n node.
  const std::size_t n_nodes = tree.levels[n].size();
  std::vector<std::size_t> desc(n_nodes, SIZE_MAX);
  for (std::size_t leaf = 0; leaf < tree.n_leaves(); ++leaf) {
    const std::size_t a = tree.ancestor(leaf, n);
    if (desc[a] == SIZE_MAX) desc[a] = leaf;
  }

  std::vector<std::vector<std::size_t>> children(tree.levels[n - 1].size());
  for (std::size_t j = 0; j < n_nodes; ++j) children[tree.parent[n][j]].push_back(j);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // leaf pairs
  for (const auto& kids : children)
    for (std::size_t k = 0; k + 1 < kids.size(); k += 2) {
      const std::size_t la = desc[kids[k]];
      const std::size_t lb = desc[kids[k + 1]];
      if (la == SIZE_MAX || lb == SIZE_MAX)
        throw std::logic_error("a level node has no leaf descendant");
      if (tree.split_level(la, lb) != n - 1)
        throw std::logic_error("sibling pair does not split at its parent level");
      const double dz = z_distance(tree, la, lb);
      if (std::abs(dz * dz - var) > 1e-12 * var)
        throw std::logic_error("sibling difference variance disagrees with the level formula");
      pairs.emplace_back(la, lb);
    }
  out.n_pairs = pairs.size();
  if (pairs.empty()) return out;

  // The pair differences must be exactly uncorrelated: the shared-prefix sums
  // cancel term for term.
  for (std::size_t i = 0; i < pairs.size(); ++i)
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      const double cov = z_covariance(tree, pairs[i].first, pairs[j].first) -
                         z_covariance(tree, pairs[i].first, pairs[j].second) -
                         z_covariance(tree, pairs[i].second, pairs[j].first) +
                         z_covariance(tree, pairs[i].second, pairs[j].second);
      if (std::abs(cov) > 1e-15)
        throw std::logic_error("sibling differences are not uncorrelated");
    }

  const double r = tree.eps(n) / out.pair_sigma;
  out.log_bound = static_cast<double>(out.n_pairs) * std::log(std::erf(r / std::sqrt(2.0)));
  return out;
}

PartitionChain canonical_partition_chain(const UltrametricTree& tree) {
  const std::size_t nl = tree.n_leaves();
  const std::size_t depth = tree.depth();
  PartitionChain ch;
  ch.diameter = tree.diameter;
  ch.cell_index.assign(depth + 1, std::vector<std::size_t>(nl, 0));
  ch.cells.resize(depth + 1);
  for (std::size_t lv = 0; lv <= depth; ++lv) {
    std::vector<std::size_t> remap(tree.levels[lv].size(), SIZE_MAX);
    std::size_t next_id = 0;
    for (std::size_t leaf = 0; leaf < nl; ++leaf) {
      const std::size_t a = tree.ancestor(leaf, lv);
      if (remap[a] == SIZE_MAX) remap[a] = next_id++;
      ch.cell_index[lv][leaf] = remap[a];
    }
    ch.cells[lv].assign(next_id, {});
    for (std::size_t leaf = 0; leaf < nl; ++leaf)
      ch.cells[lv][ch.cell_index[lv][leaf]].push_back(leaf);
  }
  return ch;
}

ChainLowerBound z_small_ball_lower(const UltrametricTree& tree, const MajorizingMeasure& mu,
                                   const WeightSequence& v, double epsilon) {
  const PartitionChain ch = canonical_partition_chain(tree);
  const double sigma = 2.0 * tree.diameter / std::sqrt(3.0);
  return mm_lower_exponent(ch, mu, v, epsilon, sigma);
}

namespace {

ZMcResult z_mc(const UltrametricTree& tree, double epsilon, std::size_t n_paths, SeedSpec seed,
               bool range_form) {
  if (!(epsilon > 0.0)) throw std::domain_error("epsilon must be positive");
  if (n_paths == 0) throw std::domain_error("n_paths must be at least 1");
  std::size_t n_nodes = 0;
  for (const auto& lv : tree.levels) n_nodes += lv.size();
  if (n_paths > (std::size_t{1} << 31) / std::max<std::size_t>(n_nodes, 1))
    throw std::length_error("path count times node count exceeds the sampling budget");

  const std::size_t depth = tree.depth();
  std::vector<double> prev;
  std::vector<double> cur;
  std::size_t hits = 0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    GaussianStream g({seed.master_seed, seed.stream_id + p});
    prev.assign(tree.levels[0].size(), 0.0);
    for (std::size_t j = 0; j < tree.levels[0].size(); ++j)
      prev[j] = tree.eps(0) * g.next();
    for (std::size_t lv = 1; lv <= depth; ++lv) {
      cur.assign(tree.levels[lv].size(), 0.0);
      for (std::size_t j = 0; j < tree.levels[lv].size(); ++j)
        cur[j] = prev[tree.parent[lv][j]] + tree.eps(lv) * g.next();
      prev.swap(cur);
    }
    double vmax = -std::numeric_limits<double>::infinity();
    double vmin = std::numeric_limits<double>::infinity();
    for (double z : prev) {
      vmax = std::max(vmax, z);
      vmin = std::min(vmin, z);
    }
    const double stat = range_form ? vmax - vmin : std::max(std::abs(vmax), std::abs(vmin));
    if (stat <= epsilon) ++hits;
  }
  ZMcResult out;
  out.epsilon = epsilon;
  out.n_paths = n_paths;
  out.p_hat = static_cast<double>(hits) / static_cast<double>(n_paths);
  out.std_err = std::sqrt(out.p_hat * (1.0 - out.p_hat) / static_cast<double>(n_paths));
  return out;
}

}  // namespace

ZMcResult z_range_mc(const UltrametricTree& tree, double epsilon, std::size_t n_paths,
                     SeedSpec seed) {
  return z_mc(tree, epsilon, n_paths, seed, true);
}

ZMcResult z_sup_mc(const UltrametricTree& tree, double epsilon, std::size_t n_paths,
                   SeedSpec seed) {
  return z_mc(tree, epsilon, n_paths, seed, false);
}

FiniteMetricSpace balanced_tree_space(std::size_t branching, std::size_t depth) {
  if (branching < 2 || depth < 1) throw std::domain_error("need branching >= 2 and depth >= 1");
  double count = 1.0;
  for (std::size_t k = 0; k < depth; ++k) count *= static_cast<double>(branching);
  if (count > 4096.0) throw std::domain_error("at most 2^12 leaves are supported");
  const std::size_t n = static_cast<std::size_t>(count);
  FiniteMetricSpace space;
  space.n = n;
  space.dist = [branching, depth](std::size_t i, std::size_t j) {
    if (i == j) return 0.0;
    std::size_t prefix = 0;
    std::size_t a = i;
    std::size_t b = j;
    std::size_t scale = 1;
    for (std::size_t k = 1; k < depth; ++k) scale *= branching;
    for (; scale > 0; scale /= branching) {
      if (a / scale != b / scale) break;
      a %= scale;
      b %= scale;
      ++prefix;
    }
    return std::ldexp(1.0, -static_cast<int>(prefix));
  };
  return space;
}

FiniteMetricSpace random_dendrogram_space(std::size_t n_points, SeedSpec seed) {
  if (n_points < 2 || n_points > 4096)
    throw std::domain_error("n_points must lie in [2, 2^12]");
  WordStream ws(seed);
  std::vector<double> heights(n_points - 1);
  for (double& h : heights) h = 0.125 + 0.875 * ws.uniform01();
  std::sort(heights.begin(), heights.end());

  auto dist = std::make_shared<std::vector<double>>(n_points * n_points, 0.0);
  std::vector<std::vector<std::size_t>> clusters(n_points);
  for (std::size_t i = 0; i < n_points; ++i) clusters[i] = {i};
  for (double h : heights) {
    const std::size_t i = ws.below(clusters.size());
    std::size_t j = ws.below(clusters.size() - 1);
    if (j >= i) ++j;
    for (std::size_t a : clusters[i])
      for (std::size_t b : clusters[j]) {
        (*dist)[a * n_points + b] = h;
        (*dist)[b * n_points + a] = h;
      }
    clusters[i].insert(clusters[i].end(), clusters[j].begin(), clusters[j].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(j));
  }

  FiniteMetricSpace space;
  space.n = n_points;
  space.dist = [dist, n_points](std::size_t a, std::size_t b) {
    return (*dist)[a * n_points + b];
  };
  return space;
}

std::string ultra_tree_json(const UltrametricTree& tree) {
  nlohmann::json j;
  j["diameter"] = tree.diameter;
  j["depth"] = tree.depth();
  j["n_points"] = tree.n_points();
  j["resolved"] = tree.resolved;
  j["first_non_splitting_level"] = tree.first_non_splitting_level;
  std::vector<double> eps;
  for (std::size_t n = 0; n <= tree.depth(); ++n) eps.push_back(tree.eps(n));
  j["eps"] = eps;
  j["levels"] = tree.levels;
  j["parent"] = tree.parent;
  return j.dump(2);
}

}  // namespace smallball
