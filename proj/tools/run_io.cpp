#include "run_io.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace ibart::cli {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char chunk[8192];
  while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(chunk[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_file(const std::string& path, SamplerConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto& hp = cfg.hp;
    const auto num = [&] { return std::stod(value); };
    if (key == "alpha") hp.alpha = num();
    else if (key == "beta") hp.beta = num();
    else if (key == "sigma_mu2") hp.sigma_mu2 = num();
    else if (key == "k_ref") { hp.k_ref = num(); hp.k_ref_explicit = true; }
    else if (key == "nu") hp.nu = num();
    else if (key == "lambda") hp.lambda = num();
    else if (key == "a_gamma") hp.a_gamma = num();
    else if (key == "b_gamma") hp.b_gamma = num();
    else if (key == "a_eta") hp.a_eta = num();
    else if (key == "b_eta") hp.b_eta = num();
    else if (key == "a_delta") hp.a_delta = num();
    else if (key == "b_delta") hp.b_delta = num();
    else if (key == "iterations") hp.iterations = static_cast<int>(num());
    else if (key == "burn_in") hp.burn_in = static_cast<int>(num());
    else if (key == "thin") hp.thin = static_cast<int>(num());
    else if (key == "seed") hp.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "mode") hp.mode = mode_from_string(value);
    else if (key == "classic_k") hp.classic_k = static_cast<int>(num());
    else if (key == "k_trunc") cfg.k_trunc = static_cast<int>(num());
    else if (key == "k_init") cfg.k_init = static_cast<int>(num());
    else if (key == "warmup") cfg.warmup = static_cast<int>(num());
    else if (key == "alternations") cfg.alternations = static_cast<int>(num());
    else if (key == "ensemble_thin") cfg.ensemble_thin = static_cast<int>(num());
    else if (key == "random_row_order") cfg.random_row_order = value == "true" || value == "1";
    else if (key == "move_grow") cfg.move_probs.grow = num();
    else if (key == "move_prune") cfg.move_probs.prune = num();
    else if (key == "move_change") cfg.move_probs.change = num();
    else if (key == "move_swap") cfg.move_probs.swap = num();
    else if (key == "min_leaf") cfg.move_probs.min_leaf = static_cast<int>(num());
    else throw std::runtime_error(path + ": unknown config key '" + key + "'");
  }
}

Json config_json(const SamplerConfig& cfg) {
  const auto& hp = cfg.hp;
  Json j;
  j["mode"] = to_string(hp.mode);
  j["alpha"] = hp.alpha;
  j["beta"] = hp.beta;
  j["sigma_mu2"] = hp.effective_sigma_mu2();
  j["k_ref"] = hp.k_ref;
  j["nu"] = hp.nu;
  j["lambda"] = hp.lambda;
  j["a_gamma"] = hp.a_gamma;
  j["b_gamma"] = hp.b_gamma;
  j["a_eta"] = hp.a_eta;
  j["b_eta"] = hp.b_eta;
  j["a_delta"] = hp.a_delta;
  j["b_delta"] = hp.b_delta;
  j["iterations"] = hp.iterations;
  j["burn_in"] = hp.burn_in;
  j["thin"] = hp.thin;
  j["seed"] = hp.seed;
  j["classic_k"] = hp.classic_k;
  j["k_trunc"] = cfg.k_trunc;
  j["k_init"] = cfg.k_init;
  j["warmup"] = cfg.warmup;
  j["alternations"] = cfg.alternations;
  j["record_ensembles"] = cfg.record_ensembles;
  j["ensemble_thin"] = cfg.ensemble_thin;
  j["random_row_order"] = cfg.random_row_order;
  j["min_leaf"] = cfg.move_probs.min_leaf;
  j["move_probs"] = {cfg.move_probs.grow, cfg.move_probs.prune, cfg.move_probs.change,
                     cfg.move_probs.swap};
  return j;
}

Json make_manifest(const std::string& command, const std::vector<std::string>& argv,
                   std::uint64_t seed, const std::vector<ManifestInput>& inputs,
                   const Json& config, const Json& dataset_info,
                   const std::vector<std::string>& artifacts, const std::string& started,
                   const std::string& finished) {
  Json j;
  j["tool"] = "ibart";
  j["command"] = command;
  j["argv"] = argv;
  j["seed"] = seed;
  j["started"] = started;
  j["finished"] = finished;
  j["inputs"] = Json::array();
  for (const auto& in : inputs) j["inputs"].push_back({{"path", in.path}, {"fnv1a64", in.digest}});
  j["config"] = config;
  if (!dataset_info.is_null()) j["dataset"] = dataset_info;
  j["artifacts"] = artifacts;
  return j;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

FeatureTable load_features(const std::string& path, const std::string& target_name) {
  FeatureTable out;
  std::ifstream probe(path);
  if (!probe) throw std::runtime_error("cannot open " + path);
  std::string header;
  if (!std::getline(probe, header)) throw std::runtime_error("empty file: " + path);
  const bool has_target = ("," + header + ",").find("," + target_name + ",") != std::string::npos ||
                          header.rfind(target_name + ",", 0) == 0 || header == target_name;
  probe.close();

  if (has_target) {
    Dataset d = load_csv(path, target_name);
    out.x = d.X;
    out.column_names = d.column_names;
    out.target.resize(d.n());
    for (int i = 0; i < d.n(); ++i) out.target[i] = d.y_original(i);
    return out;
  }
  // no target column: append a synthetic one so the same parser applies
  std::ifstream in(path);
  std::stringstream patched;
  std::string line;
  bool first = true;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    patched << line << ',' << (first ? std::string("__ibart_target__") : std::to_string(row++))
            << '\n';
    first = false;
  }
  const std::string tmp = path + ".ibart_features.tmp";
  write_text(tmp, patched.str());
  Dataset d = load_csv(tmp, "__ibart_target__");
  std::remove(tmp.c_str());
  out.x = d.X;
  out.column_names = d.column_names;
  return out;
}

void write_ensembles(const TraceStore& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  int count = 0;
  for (const auto& d : trace.draws) count += d.ensemble.has_value();
  out << "ibart-ensembles 1\n";
  out << "mode " << to_string(trace.mode) << '\n';
  out << "n " << trace.n << '\n';
  out << "p " << trace.p << '\n';
  out << "sigma_mu2 " << format_g17(trace.sigma_mu2) << '\n';
  out << "draws " << count << '\n';
  for (const auto& d : trace.draws) {
    if (!d.ensemble) continue;
    const ModelState& ens = *d.ensemble;
    out << "draw " << d.iter << '\n';
    out << "theta " << format_g17(d.sigma2) << ' ' << format_g17(d.gamma) << ' '
        << format_g17(d.delta) << ' ' << format_g17(d.eta) << '\n';
    out << "trees " << ens.active_trees() << '\n';
    for (int k = 0; k < ens.active_trees(); ++k) {
      const auto& tree = ens.trees[k];
      out << "tree " << k << ' ' << tree.size() << '\n';
      // pre-order node list; children are implied by the leaf markers
      std::vector<int> stack{0};
      while (!stack.empty()) {
        const int node = stack.back();
        stack.pop_back();
        const auto& nd = tree.node(node);
        if (nd.is_leaf()) {
          out << "node leaf " << format_g17(ens.leaves[k][nd.leaf]) << '\n';
        } else {
          out << "node split " << nd.rule.var << ' ' << format_g17(nd.rule.cut) << ' '
              << nd.rule.obs << '\n';
          stack.push_back(nd.right);
          stack.push_back(nd.left);
        }
      }
    }
    out << "w\n";
    for (int i = 0; i < trace.n; ++i) {
      std::string bits(ens.active_trees(), '0');
      for (int k = 0; k < ens.active_trees(); ++k)
        if (ens.w.get(i, k)) bits[k] = '1';
      out << bits << '\n';
    }
    out << "end\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

// rebuilds a tree (and its leaf vector) from the pre-order node lines
void parse_tree(std::istream& in, int node_count, DecisionTree& tree, LeafParams& leaves) {
  std::string line;
  // recursive descent over the pre-order stream
  const std::function<void(int)> parse_node = [&](int at) {
    if (!std::getline(in, line)) throw std::runtime_error("ensembles: truncated tree");
    std::istringstream ss(line);
    std::string tag, kind;
    ss >> tag >> kind;
    if (tag != "node") throw std::runtime_error("ensembles: expected node line");
    if (kind == "leaf") {
      double mu;
      ss >> mu;
      leaves.push_back(mu);
      return;
    }
    DecisionRule rule;
    ss >> rule.var >> rule.cut >> rule.obs;
    tree.grow(at, rule);
    // grow renumbers; fetch children after the call
    parse_node(tree.node(at).left);
    parse_node(tree.node(at).right);
  };
  parse_node(0);
  // leaves were collected in pre-order, which matches the slot numbering
  if (static_cast<int>(leaves.size()) != tree.leaf_count() || tree.size() != node_count)
    throw std::runtime_error("ensembles: tree shape mismatch");
}

}  // namespace

TraceStore read_ensembles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  TraceStore trace;
  std::string line, tag, value;

  std::getline(in, line);
  if (line != "ibart-ensembles 1") throw std::runtime_error("not an ensembles file: " + path);
  int draws = 0;
  for (int h = 0; h < 5; ++h) {
    std::getline(in, line);
    std::istringstream ss(line);
    ss >> tag;
    if (tag == "mode") { ss >> value; trace.mode = mode_from_string(value); }
    else if (tag == "n") ss >> trace.n;
    else if (tag == "p") ss >> trace.p;
    else if (tag == "sigma_mu2") ss >> trace.sigma_mu2;
    else if (tag == "draws") ss >> draws;
    else throw std::runtime_error("ensembles: unexpected header line: " + line);
  }

  for (int d = 0; d < draws; ++d) {
    TraceDraw draw;
    ModelState ens;
    ens.w = WeightMatrix(trace.n);

    std::getline(in, line);
    if (std::sscanf(line.c_str(), "draw %d", &draw.iter) != 1)
      throw std::runtime_error("ensembles: expected draw line, got: " + line);
    std::getline(in, line);
    {
      std::istringstream ss(line);
      ss >> tag >> draw.sigma2 >> draw.gamma >> draw.delta >> draw.eta;
      if (tag != "theta") throw std::runtime_error("ensembles: expected theta line");
    }
    int k_n = 0;
    std::getline(in, line);
    if (std::sscanf(line.c_str(), "trees %d", &k_n) != 1)
      throw std::runtime_error("ensembles: expected trees line");
    draw.k_n = k_n;
    for (int k = 0; k < k_n; ++k) {
      int idx = 0, nodes = 0;
      std::getline(in, line);
      if (std::sscanf(line.c_str(), "tree %d %d", &idx, &nodes) != 2)
        throw std::runtime_error("ensembles: expected tree line");
      DecisionTree tree;
      LeafParams leaves;
      parse_tree(in, nodes, tree, leaves);
      ens.trees.push_back(std::move(tree));
      ens.leaves.push_back(std::move(leaves));
    }
    std::getline(in, line);
    if (line != "w") throw std::runtime_error("ensembles: expected w section");
    std::vector<std::vector<std::uint8_t>> cols(k_n, std::vector<std::uint8_t>(trace.n, 0));
    for (int i = 0; i < trace.n; ++i) {
      std::getline(in, line);
      if (static_cast<int>(line.size()) != k_n) throw std::runtime_error("ensembles: bad w row");
      for (int k = 0; k < k_n; ++k) cols[k][i] = line[k] == '1';
    }
    for (auto& col : cols) ens.w.append_column(std::move(col));
    std::getline(in, line);
    if (line != "end") throw std::runtime_error("ensembles: expected end marker");

    ens.sigma2 = draw.sigma2;
    ens.ibp.gamma = draw.gamma;
    ens.ibp.delta = draw.delta;
    ens.ibp.eta = draw.eta;
    draw.split_counts.assign(trace.p, 0);
    draw.z_per_tree.assign(trace.p, 0.0);
    for (const auto& t : ens.trees) t.count_splits(draw.split_counts);
    for (int c : draw.split_counts) draw.total_splits += c;
    draw.ensemble = std::move(ens);
    trace.draws.push_back(std::move(draw));
  }
  return trace;
}

void write_trace_csv(const TraceStore& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "iter,sigma2,gamma,delta,eta,K_n";
  for (const auto& name : trace.column_names) out << ",splits_" << name;
  out << '\n';
  for (const auto& d : trace.draws) {
    out << d.iter << ',' << format_g17(d.sigma2) << ',' << format_g17(d.gamma) << ','
        << format_g17(d.delta) << ',' << format_g17(d.eta) << ',' << d.k_n;
    for (int c : d.split_counts) out << ',' << c;
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace ibart::cli
