#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ibart/tree_moves.hpp"
#include "support.hpp"

using namespace ibart;
namespace ts = test_support;

namespace {

Matrix uniform_matrix(int n, int p, Rng& rng) {
  Matrix X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.uniform();
  return X;
}

std::vector<int> all_rows(int n) {
  std::vector<int> r(n);
  for (int i = 0; i < n; ++i) r[i] = i;
  return r;
}

// test-local routing, independent of DecisionTree::leaf_node_for
int route_by_hand(const DecisionTree& tree, const Matrix& X, int row) {
  int node = 0;
  while (!tree.node(node).is_leaf()) {
    const auto& r = tree.node(node).rule;
    node = X(row, r.var) <= r.cut ? tree.node(node).left : tree.node(node).right;
  }
  return node;
}

}  // namespace

TEST_CASE("tree log prior: hand-evaluated cases") {
  DecisionTree root_only;
  CHECK(tree_log_prior(root_only, 0.95, 2.0) == doctest::Approx(std::log(0.05)));

  DecisionTree one_split;
  one_split.grow(0, DecisionRule{0, 0, 0.5});
  CHECK(tree_log_prior(one_split, 0.95, 2.0) ==
        doctest::Approx(std::log(0.95) + 2.0 * std::log(1.0 - 0.95 / 4.0)));

  // with beta huge, depth >= 1 splits lose all prior mass while the
  // single-split tree keeps log(alpha)
  CHECK(tree_log_prior(one_split, 0.95, 1e6) == doctest::Approx(std::log(0.95)));
  DecisionTree deep = one_split;
  deep.grow(deep.node(0).left, DecisionRule{0, 0, 0.25});
  CHECK(tree_log_prior(deep, 0.95, 1e6) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("leaf sufficient stats: single bucket and one split") {
  Rng rng(1);
  Matrix X(3, 1);
  X(0, 0) = 0.1;
  X(1, 0) = 0.2;
  X(2, 0) = 0.9;
  const std::vector<int> rows{0, 1, 2};

  DecisionTree root_only;
  auto stats = leaf_sufficient_stats(root_only, std::vector<double>{1.0, 2.0, 3.0}, rows, X);
  REQUIRE(stats.size() == 1);
  CHECK(stats[0].n == 3);
  CHECK(stats[0].s == doctest::Approx(6.0));
  CHECK(stats[0].q == doctest::Approx(14.0));

  DecisionTree split;
  split.grow(0, DecisionRule{1, 0, 0.2});  // rows 0,1 left / row 2 right
  stats = leaf_sufficient_stats(split, std::vector<double>{1.0, 2.0, 3.0}, rows, X);
  REQUIRE(stats.size() == 2);
  const int left_slot = split.node(split.node(0).left).leaf;
  const int right_slot = split.node(split.node(0).right).leaf;
  CHECK(stats[left_slot].n == 2);
  CHECK(stats[left_slot].s == doctest::Approx(3.0));
  CHECK(stats[left_slot].q == doctest::Approx(5.0));
  CHECK(stats[right_slot].n == 1);
  CHECK(stats[right_slot].s == doctest::Approx(3.0));
  CHECK(stats[right_slot].q == doctest::Approx(9.0));
}

TEST_CASE("stats stay consistent with brute force across random proposals") {
  Rng rng(22);
  const int n = 40, p = 3;
  Matrix X = uniform_matrix(n, p, rng);
  const auto rows = all_rows(n);
  std::vector<double> resid(n);
  for (auto& r : resid) r = rng.normal();

  DecisionTree tree;
  LeafParams leaves{0.0};
  MoveProbs probs;
  for (int it = 0; it < 100; ++it) {
    mh_update_tree(tree, leaves, resid, rows, X, 0.5, 0.1, 0.95, 1.0, probs, rng);
    const auto stats = leaf_sufficient_stats(tree, resid, rows, X);
    std::vector<LeafStat> brute(tree.leaf_count());
    for (int i = 0; i < n; ++i) {
      const int slot = tree.node(route_by_hand(tree, X, i)).leaf;
      brute[slot].n += 1;
      brute[slot].s += resid[i];
      brute[slot].q += resid[i] * resid[i];
    }
    int total = 0;
    for (size_t l = 0; l < brute.size(); ++l) {
      CHECK(stats[l].n == brute[l].n);
      CHECK(stats[l].n >= 1);  // accepted proposals never leave empty cells
      CHECK(stats[l].s == doctest::Approx(brute[l].s).epsilon(1e-12));
      CHECK(stats[l].q == doctest::Approx(brute[l].q).epsilon(1e-12));
      total += stats[l].n;
    }
    CHECK(total == n);
    tree.check_structure();
  }
}

TEST_CASE("integrated log lik: hand case and vanishing leaf prior") {
  std::vector<LeafStat> one{{1, 0.0, 0.0}};
  CHECK(integrated_log_lik(one, 1.0, 1.0) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI) + 0.5 * std::log(0.5)));

  // sigma_mu2 -> 0 pins the leaf mean at zero
  std::vector<LeafStat> stats{{3, 1.2, 3.4}, {2, -0.7, 1.9}};
  const double got = integrated_log_lik(stats, 0.8, 1e-300);
  double expected = 0.0;
  for (const auto& st : stats)
    expected += -0.5 * st.n * std::log(2.0 * M_PI * 0.8) - st.q / (2.0 * 0.8);
  CHECK(got == doctest::Approx(expected).epsilon(1e-10));

  CHECK_THROWS_AS(integrated_log_lik(stats, -1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(integrated_log_lik(stats, 1.0, 0.0), std::domain_error);
}

TEST_CASE("integrated log lik matches quadrature on random instances") {
  Rng rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const int n_leaf = 1 + rng.uniform_int(4);
    const double sigma2 = 0.2 + rng.uniform();
    const double sigma_mu2 = 0.05 + rng.uniform();
    std::vector<LeafStat> stats;
    double direct = 0.0;
    for (int l = 0; l < n_leaf; ++l) {
      const int m = 1 + rng.uniform_int(6);
      std::vector<double> r(m);
      for (auto& v : r) v = rng.normal(0.0, 1.5);
      LeafStat st;
      st.n = m;
      for (double v : r) {
        st.s += v;
        st.q += v * v;
      }
      stats.push_back(st);

      // independent oracle: 1-D quadrature of prod_i N(r_i; mu, s2) N(mu; 0, sm2)
      const double post_var = 1.0 / (1.0 / sigma_mu2 + m / sigma2);
      const double post_mean = (st.s / sigma2) * post_var;
      const auto integrand_log = [&](double mu) {
        double acc = ts::log_normal_pdf(mu, 0.0, sigma_mu2);
        for (double v : r) acc += ts::log_normal_pdf(v, mu, sigma2);
        return acc;
      };
      const double peak = integrand_log(post_mean);
      const double width = 12.0 * std::sqrt(post_var);
      const double integral = ts::simpson(
          [&](double mu) { return std::exp(integrand_log(mu) - peak); }, post_mean - width,
          post_mean + width, 4000);
      direct += peak + std::log(integral);
    }
    CHECK(integrated_log_lik(stats, sigma2, sigma_mu2) ==
          doctest::Approx(direct).epsilon(1e-8));
  }
}

TEST_CASE("kind selection folds inapplicable moves into grow") {
  MoveProbs probs;
  DecisionTree root_only;
  auto p = move_kind_probs(root_only, probs);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == 0.0);
  CHECK(p[2] == 0.0);
  CHECK(p[3] == 0.0);

  DecisionTree one_split;
  one_split.grow(0, DecisionRule{0, 0, 0.5});
  p = move_kind_probs(one_split, probs);  // swap has no internal pair
  CHECK(p[0] == doctest::Approx(0.35));
  CHECK(p[1] == doctest::Approx(0.25));
  CHECK(p[2] == doctest::Approx(0.40));
  CHECK(p[3] == 0.0);
}

TEST_CASE("kind draw frequencies match the effective probabilities") {
  Rng rng(5);
  Matrix X = uniform_matrix(30, 2, rng);
  DecisionTree tree;
  tree.grow(0, DecisionRule{0, 0, X(0, 0)});
  // make the left child internal so swap applies
  int left = tree.node(0).left;
  tree.grow(left, DecisionRule{1, 1, X(1, 1)});

  MoveProbs probs;
  const auto expect = move_kind_probs(tree, probs);
  std::vector<int> counts(4, 0);
  const int draws = 10000;
  for (int it = 0; it < draws; ++it) ++counts[static_cast<int>(draw_move_kind(tree, probs, rng))];
  for (int k = 0; k < 4; ++k) {
    const double se = std::sqrt(expect[k] * (1.0 - expect[k]) / draws);
    CHECK(std::fabs(double(counts[k]) / draws - expect[k]) < 3.0 * se + 1e-12);
  }
}

TEST_CASE("prune proposal on a root-only tree is invalid") {
  Rng rng(2);
  Matrix X = uniform_matrix(10, 2, rng);
  DecisionTree tree;
  const auto prop = propose(tree, MoveKind::prune, X, all_rows(10), MoveProbs{}, rng);
  CHECK_FALSE(prop.valid);
  const auto prop2 = propose(tree, MoveKind::swap, X, all_rows(10), MoveProbs{}, rng);
  CHECK_FALSE(prop2.valid);
}

TEST_CASE("grow and its matching prune are exact proposal mirrors") {
  Rng rng(88);
  const int n = 25;
  Matrix X = uniform_matrix(n, 3, rng);
  const auto rows = all_rows(n);
  MoveProbs probs;

  int checked = 0;
  for (int rep = 0; rep < 200 && checked < 50; ++rep) {
    // random starting tree
    DecisionTree tree;
    LeafParams leaves{0.0};
    std::vector<double> resid(n);
    for (auto& r : resid) r = rng.normal();
    for (int it = 0; it < 10; ++it)
      mh_update_tree(tree, leaves, resid, rows, X, 1.0, 0.5, 0.95, 0.5, probs, rng);

    const auto grow = propose(tree, MoveKind::grow, X, rows, probs, rng);
    if (!grow.valid) continue;
    // find the prune proposal that undoes it
    for (int attempt = 0; attempt < 200; ++attempt) {
      Rng rng2(rep * 1000 + attempt);
      const auto prune = propose(grow.candidate, MoveKind::prune, X, rows, probs, rng2);
      if (!prune.valid || prune.node != grow.node) continue;
      CHECK(prune.forward_logprob == doctest::Approx(grow.reverse_logprob).epsilon(1e-12));
      CHECK(prune.reverse_logprob == doctest::Approx(grow.forward_logprob).epsilon(1e-12));
      ++checked;
      break;
    }
  }
  CHECK(checked >= 50);
}

TEST_CASE("change proposing the identical rule is always accepted") {
  Rng rng(4);
  const int n = 12;
  Matrix X(n, 1);
  for (int i = 0; i < n; ++i) X(i, 0) = i;  // single variable, distinct values
  const auto rows = all_rows(n);
  DecisionTree tree;
  tree.grow(0, DecisionRule{5, 0, X(5, 0)});

  MoveProbs probs;
  for (int it = 0; it < 300; ++it) {
    const auto prop = propose(tree, MoveKind::change, X, rows, probs, rng);
    REQUIRE(prop.valid);
    if (prop.rule.obs == 5) {
      CHECK(prop.forward_logprob == doctest::Approx(prop.reverse_logprob));
      break;
    }
  }
}

TEST_CASE("prior with tiny alpha collapses the chain to a root-only tree") {
  Rng rng(19);
  const int n = 30;
  Matrix X = uniform_matrix(n, 2, rng);
  const auto rows = all_rows(n);
  std::vector<double> resid(n);
  for (auto& r : resid) r = rng.normal();

  DecisionTree tree;
  tree.grow(0, DecisionRule{0, 0, X(0, 0)});
  LeafParams leaves(tree.leaf_count(), 0.0);
  MoveProbs probs;
  probs.min_leaf = 1;
  for (int it = 0; it < 100; ++it)
    mh_update_tree(tree, leaves, resid, rows, X, 1.0, 1e-12, 1e-3, 50.0, probs, rng);
  CHECK(tree.size() == 1);
}

TEST_CASE("single active observation keeps the tree root-only") {
  Rng rng(6);
  Matrix X = uniform_matrix(5, 2, rng);
  const std::vector<int> rows{2};
  const std::vector<double> resid{0.4};
  DecisionTree tree;
  LeafParams leaves{0.0};
  for (int it = 0; it < 50; ++it)
    mh_update_tree(tree, leaves, resid, rows, X, 1.0, 0.1, 0.95, 2.0, MoveProbs{}, rng);
  CHECK(tree.size() == 1);
}

TEST_CASE("leaf draws follow the conjugate posterior") {
  Rng rng(123);
  DecisionTree tree;
  std::vector<LeafStat> stats{{1, 2.0, 4.0}};
  std::vector<double> draws(10000);
  for (auto& v : draws) v = draw_leaves(tree, stats, 1.0, 1.0, rng)[0];
  // N(1, 0.5)
  CHECK(std::fabs(ts::mean(draws) - 1.0) < 3.0 * ts::se_mean(draws));
  CHECK(ts::variance(draws) == doctest::Approx(0.5).epsilon(0.06));

  // zero residual sum centers the posterior at zero regardless of variances
  std::vector<LeafStat> zero{{4, 0.0, 1.0}};
  for (auto& v : draws) v = draw_leaves(tree, zero, 0.3, 2.0, rng)[0];
  CHECK(std::fabs(ts::mean(draws)) < 3.0 * ts::se_mean(draws));
}

TEST_CASE("fixed-tree Gibbs on leaves matches the conjugate moments per leaf") {
  Rng rng(321);
  const int n = 18;
  Matrix X(n, 1);
  for (int i = 0; i < n; ++i) X(i, 0) = i;
  const auto rows = all_rows(n);
  std::vector<double> resid(n);
  for (auto& r : resid) r = rng.normal(0.5, 1.2);

  DecisionTree tree;
  tree.grow(0, DecisionRule{8, 0, X(8, 0)});
  const double sigma2 = 0.7, sigma_mu2 = 0.4;
  const auto stats = leaf_sufficient_stats(tree, resid, rows, X);

  std::vector<std::vector<double>> per_leaf(2);
  for (int it = 0; it < 10000; ++it) {
    const auto mu = draw_leaves(tree, stats, sigma2, sigma_mu2, rng);
    per_leaf[0].push_back(mu[0]);
    per_leaf[1].push_back(mu[1]);
  }
  for (int l = 0; l < 2; ++l) {
    const double prec = 1.0 / sigma_mu2 + stats[l].n / sigma2;
    const double mean = (stats[l].s / sigma2) / prec;
    CHECK(std::fabs(ts::mean(per_leaf[l]) - mean) < 3.0 * ts::se_mean(per_leaf[l]));
    CHECK(ts::variance(per_leaf[l]) == doctest::Approx(1.0 / prec).epsilon(0.06));
  }
}

TEST_CASE("accepted proposals always leave a structurally valid tree") {
  Rng rng(777);
  const int n = 50, p = 4;
  Matrix X = uniform_matrix(n, p, rng);
  const auto rows = all_rows(n);
  std::vector<double> resid(n);
  for (int i = 0; i < n; ++i) resid[i] = std::sin(6.0 * X(i, 0)) + 0.2 * rng.normal();

  DecisionTree tree;
  LeafParams leaves{0.0};
  MoveProbs probs;
  int accepted = 0;
  for (int it = 0; it < 2000; ++it) {
    const auto res = mh_update_tree(tree, leaves, resid, rows, X, 0.05, 0.2, 0.95, 2.0, probs, rng);
    if (res.accepted) {
      ++accepted;
      tree.check_structure();
      CHECK(static_cast<int>(leaves.size()) == tree.leaf_count());
      // no empty cells among the active observations
      std::vector<int> hit(tree.leaf_count(), 0);
      for (int i = 0; i < n; ++i) hit[tree.node(route_by_hand(tree, X, i)).leaf] = 1;
      for (int h : hit) CHECK(h == 1);
    }
  }
  CHECK(accepted > 50);  // the chain actually moves
}

namespace {

// Canonical serialization of structure and rules in pre-order.
std::string tree_key(const DecisionTree& tree) {
  std::string key;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const auto& nd = tree.node(i);
    if (nd.is_leaf()) {
      key += "L";
    } else {
      key += "S" + std::to_string(nd.rule.obs);
      stack.push_back(nd.right);
      stack.push_back(nd.left);
    }
    key += ' ';
  }
  return key;
}

// Exact unnormalized log posterior of one tree: branching prior, uniform
// rule prior (one variable, so 1/(rows at node - 1) per internal node),
// and the leaf-integrated likelihood.
double exact_tree_log_post(const DecisionTree& tree, const ibart::Matrix& X,
                           const std::vector<double>& resid, const std::vector<int>& rows,
                           double sigma2, double sigma_mu2, double alpha, double beta) {
  double lp = tree_log_prior(tree, alpha, beta) +
              integrated_log_lik(leaf_sufficient_stats(tree, resid, rows, X), sigma2, sigma_mu2);
  std::vector<int> node_rows(tree.size(), 0);
  for (int r : rows) {
    int node = 0;
    ++node_rows[0];
    while (!tree.node(node).is_leaf()) {
      const auto& rule = tree.node(node).rule;
      node = X(r, rule.var) <= rule.cut ? tree.node(node).left : tree.node(node).right;
      ++node_rows[node];
    }
  }
  for (int i = 0; i < tree.size(); ++i)
    if (!tree.node(i).is_leaf()) lp -= std::log(static_cast<double>(node_rows[i] - 1));
  return lp;
}

struct PendingLeaf {
  int node;
  int begin;  // contiguous row span [begin, end)
  int end;
};

// Generates every tree over a sorted one-variable design exactly once:
// pending leaves are resolved in FIFO order, each either kept or split at
// one of its admissible observation cuts.
void enumerate_trees(const DecisionTree& tree, std::vector<PendingLeaf> pending,
                     const ibart::Matrix& X, const std::function<void(const DecisionTree&)>& emit) {
  if (pending.empty()) {
    emit(tree);
    return;
  }
  const PendingLeaf cur = pending.front();
  pending.erase(pending.begin());
  enumerate_trees(tree, pending, X, emit);  // keep as leaf
  for (int cut = cur.begin; cut < cur.end - 1; ++cut) {
    DecisionTree grown = tree;
    grown.grow(cur.node, DecisionRule{cut, 0, X(cut, 0)});
    auto next = pending;
    next.push_back({grown.node(cur.node).left, cur.begin, cut + 1});
    next.push_back({grown.node(cur.node).right, cut + 1, cur.end});
    enumerate_trees(grown, next, X, emit);
  }
}

}  // namespace

TEST_CASE("single-tree chain matches exhaustive enumeration of the posterior") {
  const int n = 6;
  ibart::Matrix X(n, 1);
  for (int i = 0; i < n; ++i) X(i, 0) = i + 1.0;
  std::vector<int> rows(n);
  for (int i = 0; i < n; ++i) rows[i] = i;
  const std::vector<double> resid{0.9, 0.7, -0.2, -0.8, 0.3, 1.1};
  const double sigma2 = 0.4, sigma_mu2 = 0.6, alpha = 0.6, beta = 0.8;

  // exact distribution over all trees
  std::map<std::string, double> log_post;
  enumerate_trees(DecisionTree{}, {{0, 0, n}}, X, [&](const DecisionTree& t) {
    log_post[tree_key(t)] =
        exact_tree_log_post(t, X, resid, rows, sigma2, sigma_mu2, alpha, beta);
  });
  REQUIRE(log_post.size() == 188);  // tree count over six ordered points
  double mx = -1e300;
  for (const auto& [k, v] : log_post) mx = std::max(mx, v);
  double z = 0.0;
  for (const auto& [k, v] : log_post) z += std::exp(v - mx);
  std::map<std::string, double> prob;
  for (const auto& [k, v] : log_post) prob[k] = std::exp(v - mx) / z;

  // long chain over the same target
  MoveProbs probs;
  probs.min_leaf = 1;
  Rng rng(20240915);
  DecisionTree tree;
  LeafParams leaves{0.0};
  const int iters = 400000, batches = 40;
  std::map<std::string, std::vector<int>> batch_counts;
  for (int it = 0; it < iters; ++it) {
    mh_update_tree(tree, leaves, resid, rows, X, sigma2, sigma_mu2, alpha, beta, probs, rng);
    auto& bc = batch_counts[tree_key(tree)];
    if (bc.empty()) bc.assign(batches, 0);
    ++bc[it * batches / iters];
  }

  int checked = 0;
  for (const auto& [key, p] : prob) {
    if (p < 0.004) continue;
    const auto it = batch_counts.find(key);
    const double per_batch = static_cast<double>(iters) / batches;
    std::vector<double> freqs(batches, 0.0);
    if (it != batch_counts.end())
      for (int b = 0; b < batches; ++b) freqs[b] = it->second[b] / per_batch;
    const double mean = ts::mean(freqs);
    const double se = ts::sd(freqs) / std::sqrt(static_cast<double>(batches));
    CHECK(std::fabs(mean - p) < 4.0 * se + 0.002);
    ++checked;
  }
  CHECK(checked >= 10);
  // every visited state must be a legal enumerated tree
  for (const auto& [key, bc] : batch_counts) CHECK(prob.count(key) == 1);
}
