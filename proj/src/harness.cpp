#include "swarmdet/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include "swarmdet/clustering.hpp"
#include "swarmdet/diff.hpp"
#include "swarmdet/rng.hpp"

namespace swarmdet {
namespace {

namespace fs = std::filesystem;

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& v, char sep = '|') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out.push_back(sep);
    out += std::to_string(v[i]);
  }
  return out;
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const char* where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) known = known || item.key() == key;
    if (!known)
      throw std::invalid_argument("config: unknown key \"" + item.key() + "\" in " + where);
  }
}

// Files are written in binary so the CRLF line endings in CSV bodies and the
// trailing newline of JSON dumps survive byte for byte on every platform.
void write_file(const fs::path& root, const std::string& rel, const std::string& body,
                std::vector<std::string>* files) {
  const fs::path full = root / rel;
  fs::create_directories(full.parent_path());
  std::ofstream out(full, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + full.string());
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (files != nullptr) files->push_back(rel);
}

void write_json(const fs::path& root, const std::string& rel, const nlohmann::json& j,
                std::vector<std::string>* files) {
  write_file(root, rel, j.dump(2) + "\n", files);
}

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd mat_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::invalid_argument("matrix json: data length mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++];
  return m;
}

// Square attention matrix as CSV: header names the target UAVs, each row
// starts with the observer UAV.
std::string matrix_csv(const std::vector<int>& members, const Eigen::MatrixXd& m) {
  std::string out = "observer";
  for (int id : members) out += "," + std::to_string(id);
  out += "\r\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += std::to_string(members.at(static_cast<std::size_t>(r)));
    for (Eigen::Index c = 0; c < m.cols(); ++c) out += "," + fmt_g(m(r, c));
    out += "\r\n";
  }
  return out;
}

GasslHyper gassl_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"episodes", "learning_rate", "key_dim", "query_hidden", "sim_hidden",
                       "ifsn_hidden", "top_k", "early_stop_eps", "early_stop_window"},
                      "gassl");
  GasslHyper h;
  if (j.contains("episodes")) h.episodes = j.at("episodes").get<int>();
  if (j.contains("learning_rate")) h.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("key_dim")) h.key_dim = j.at("key_dim").get<int>();
  if (j.contains("query_hidden")) h.query_hidden = j.at("query_hidden").get<int>();
  if (j.contains("sim_hidden")) h.sim_hidden = j.at("sim_hidden").get<int>();
  if (j.contains("ifsn_hidden")) h.ifsn_hidden = j.at("ifsn_hidden").get<int>();
  if (j.contains("top_k")) h.top_k = j.at("top_k").get<int>();
  if (j.contains("early_stop_eps")) h.early_stop_eps = j.at("early_stop_eps").get<double>();
  if (j.contains("early_stop_window")) h.early_stop_window = j.at("early_stop_window").get<int>();
  return h;
}

McHyper mc_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"gamma", "beta_prime", "alpha_meta", "batch", "meta_episodes",
                       "dataset_clusters", "max_rounds", "kmax", "refs", "online_steps"},
                      "mc");
  McHyper h;
  if (j.contains("gamma")) h.gamma = j.at("gamma").get<double>();
  if (j.contains("beta_prime")) h.beta_prime = j.at("beta_prime").get<double>();
  if (j.contains("alpha_meta")) h.alpha_meta = j.at("alpha_meta").get<double>();
  if (j.contains("batch")) h.batch = j.at("batch").get<int>();
  if (j.contains("meta_episodes")) h.meta_episodes = j.at("meta_episodes").get<int>();
  if (j.contains("dataset_clusters")) h.dataset_clusters = j.at("dataset_clusters").get<int>();
  if (j.contains("max_rounds")) h.max_rounds = j.at("max_rounds").get<int>();
  if (j.contains("kmax")) h.kmax = j.at("kmax").get<int>();
  if (j.contains("refs")) h.refs = j.at("refs").get<int>();
  if (j.contains("online_steps")) h.online_steps = j.at("online_steps").get<int>();
  return h;
}

nlohmann::json gassl_to_json(const GasslHyper& h) {
  return {{"episodes", h.episodes},
          {"learning_rate", h.learning_rate},
          {"key_dim", h.key_dim},
          {"query_hidden", h.query_hidden},
          {"sim_hidden", h.sim_hidden},
          {"ifsn_hidden", h.ifsn_hidden},
          {"top_k", h.top_k},
          {"early_stop_eps", h.early_stop_eps},
          {"early_stop_window", h.early_stop_window}};
}

nlohmann::json mc_to_json(const McHyper& h) {
  return {{"gamma", h.gamma},
          {"beta_prime", h.beta_prime},
          {"alpha_meta", h.alpha_meta},
          {"batch", h.batch},
          {"meta_episodes", h.meta_episodes},
          {"dataset_clusters", h.dataset_clusters},
          {"max_rounds", h.max_rounds},
          {"kmax", h.kmax},
          {"refs", h.refs},
          {"online_steps", h.online_steps}};
}

// The meta encoder for a run: an explicit checkpoint wins; otherwise train
// from the config seed and leave the weights plus the query-loss curve in
// the run directory. Training here and via the `meta` subcommand use the
// same seed derivation, so a saved checkpoint reproduces the inline path.
GruEncoderParams obtain_encoder(const ExperimentConfig& config, ReportBundle* bundle) {
  if (!config.meta_checkpoint.empty()) return load_encoder(config.meta_checkpoint);
  MetaDataset dataset = make_meta_dataset(config.mc.meta_episodes, config.mc.dataset_clusters,
                                          tag_seed(config.seed, "meta-data"));
  std::vector<double> losses;
  GruEncoderParams w =
      meta_train(dataset, config.mc, tag_seed(config.seed, "meta-train"), &losses);
  save_encoder(w, (fs::path(config.out_dir) / "w_star.json").string());
  if (bundle != nullptr) bundle->files.push_back("w_star.json");
  std::string csv = "episode,query_loss\r\n";
  for (std::size_t e = 0; e < losses.size(); ++e)
    csv += std::to_string(e) + "," + fmt_g(losses[e]) + "\r\n";
  write_file(config.out_dir, "meta_losses.csv", csv, bundle ? &bundle->files : nullptr);
  return w;
}

nlohmann::json diag_to_json(const RoundDiag& d) {
  nlohmann::json j{{"round", d.round},
                   {"m_hat", d.m_hat},
                   {"members", d.members},
                   {"assignments", d.assignments},
                   {"encoded", mat_json(d.encoded)},
                   {"candidates", d.candidates}};
  if (!d.score.members.empty()) {
    std::vector<double> votes(d.score.votes.data(), d.score.votes.data() + d.score.votes.size());
    j["score"] = {{"members", d.score.members},
                  {"best_fit", d.score.best_fit},
                  {"votes", votes},
                  {"chosen", d.score.chosen}};
  }
  return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"problem", "ifs", "cluster_sizes", "trials", "seed", "out", "t_ob", "arena",
                       "save_artifacts", "purity_seeds", "meta_checkpoint", "gassl", "mc"},
                      "config");
  ExperimentConfig c;
  c.problem = j.at("problem").get<std::string>();
  if (j.contains("ifs"))
    for (const auto& name : j.at("ifs")) c.ifs_kinds.push_back(ifs_kind_from_string(name));
  if (j.contains("cluster_sizes"))
    c.cluster_sizes = j.at("cluster_sizes").get<std::vector<std::vector<int>>>();
  if (j.contains("trials")) c.trials = j.at("trials").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
  if (j.contains("arena")) {
    const auto a = j.at("arena").get<std::vector<double>>();
    if (a.size() != 3) throw std::invalid_argument("config: arena needs exactly 3 extents");
    c.arena = Eigen::Vector3d(a[0], a[1], a[2]);
  }
  if (j.contains("save_artifacts")) c.save_artifacts = j.at("save_artifacts").get<bool>();
  if (j.contains("purity_seeds")) c.purity_seeds = j.at("purity_seeds").get<int>();
  if (j.contains("meta_checkpoint")) c.meta_checkpoint = j.at("meta_checkpoint").get<std::string>();
  if (j.contains("gassl")) c.gassl = gassl_from_json(j.at("gassl"));
  if (j.contains("mc")) c.mc = mc_from_json(j.at("mc"));
  if (j.contains("t_ob")) c.mc.t_ob = j.at("t_ob").get<int>();
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  std::vector<std::string> names;
  for (IfsKind kind : ifs_kinds) names.push_back(to_string(kind));
  return {{"problem", problem},
          {"ifs", names},
          {"cluster_sizes", cluster_sizes},
          {"trials", trials},
          {"seed", seed},
          {"out", out_dir},
          {"t_ob", mc.t_ob},
          {"arena", std::vector<double>{arena.x(), arena.y(), arena.z()}},
          {"save_artifacts", save_artifacts},
          {"purity_seeds", purity_seeds},
          {"meta_checkpoint", meta_checkpoint},
          {"gassl", gassl_to_json(gassl)},
          {"mc", mc_to_json(mc)}};
}

void ExperimentConfig::validate() const {
  if (problem != "p1" && problem != "p2" && problem != "meta" && problem != "purity")
    throw std::invalid_argument("config: problem must be p1, p2, meta or purity");
  if (out_dir.empty()) throw std::invalid_argument("config: out directory required");
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (purity_seeds < 1) throw std::invalid_argument("config: purity_seeds must be >= 1");
  if (arena.minCoeff() <= 0.0) throw std::invalid_argument("config: arena extents must be positive");
  if (gassl.episodes < 0 || gassl.learning_rate <= 0.0 || gassl.key_dim < 1 ||
      gassl.query_hidden < 1 || gassl.sim_hidden < 1 || gassl.ifsn_hidden < 1 ||
      gassl.top_k < 1 || gassl.early_stop_eps < 0.0 || gassl.early_stop_window < 1)
    throw std::invalid_argument("config: bad gassl hyperparameters");
  mc.validate();
  if (problem == "meta") return;  // grid fields unused
  if (ifs_kinds.empty()) throw std::invalid_argument("config: at least one ifs kind required");
  if (cluster_sizes.empty()) throw std::invalid_argument("config: cluster_sizes grid required");
  for (const auto& sizes : cluster_sizes) {
    if (sizes.empty()) throw std::invalid_argument("config: empty cluster_sizes entry");
    if (problem == "p1" && sizes.size() != 1)
      throw std::invalid_argument("config: p1 entries are single cluster sizes");
    for (int m : sizes)
      if (m < 2) throw std::invalid_argument("config: clusters need at least 2 followers");
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  nlohmann::json j;
  in >> j;
  return ExperimentConfig::from_json(j);
}

IfsSpec experiment_ifs(IfsKind kind, std::uint64_t config_seed) {
  if (kind == IfsKind::f7) return make_f7_spec(tag_seed(config_seed, "f7-net"));
  IfsSpec spec;
  spec.kind = kind;
  return spec;
}

nlohmann::json artifacts_to_json(const TrainArtifacts& artifacts, const LeaderVote& vote) {
  nlohmann::json heads = nlohmann::json::array();
  for (const Eigen::MatrixXd& h : artifacts.head_matrices) heads.push_back(mat_json(h));
  return {{"members", vote.members},
          {"weight_matrix", mat_json(artifacts.weight_matrix)},
          {"head_matrices", heads},
          {"initial_loss", artifacts.initial_loss},
          {"final_loss", artifacts.final_loss},
          {"episodes_run", artifacts.episodes_run},
          {"vote", vote_to_json(vote)}};
}

GruEncoderParams load_encoder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read encoder " + path);
  nlohmann::json j;
  in >> j;
  GruEncoderParams enc = make_encoder(0);  // shapes the tensors, values overwritten
  gru_from_json(j, enc.params);
  return enc;
}

void save_encoder(const GruEncoderParams& enc, const std::string& path) {
  const fs::path full(path);
  if (full.has_parent_path()) fs::create_directories(full.parent_path());
  std::ofstream out(full, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write encoder " + path);
  const std::string body = gru_to_json(enc.params).dump(2) + "\n";
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

ReportBundle run_p1_suite(const ExperimentConfig& config) {
  config.validate();
  if (config.problem != "p1") throw std::invalid_argument("run_p1_suite: problem must be p1");
  const fs::path root(config.out_dir);
  fs::create_directories(root);
  ReportBundle bundle;
  write_json(root, "config_echo.json", config.to_json(), &bundle.files);

  for (IfsKind kind : config.ifs_kinds) {
    for (const auto& sizes : config.cluster_sizes) {
      const int m = sizes.front();
      const std::uint64_t cell_seed = tag_seed(config.seed, to_string(kind).c_str(), m);
      double sum_j = 0.0;
      for (int trial = 0; trial < config.trials; ++trial) {
        const std::uint64_t trial_seed = derive_seed(cell_seed, static_cast<std::uint64_t>(trial));
        SwarmConfig sc;
        sc.cluster_sizes = {m};
        sc.arena = config.arena;
        sc.ifs = experiment_ifs(kind, config.seed);
        SwarmState swarm = init_swarm(sc, tag_seed(trial_seed, "swarm"));
        swarm.advance(config.mc.t_ob);
        const int head = swarm.live_huavs().front();
        const std::vector<int> members = swarm.cluster_members(head);

        TrainArtifacts artifacts;
        const bool keep = config.save_artifacts && trial == 0;
        const LeaderVote vote =
            train_single_cluster(swarm, members, config.mc.t_ob, config.gassl,
                                 tag_seed(trial_seed, "train"), nullptr,
                                 keep ? &artifacts : nullptr);
        P1Trial row;
        row.ifs = to_string(kind);
        row.m = m;
        row.trial = trial;
        row.seed = trial_seed;
        row.true_head = head;
        row.candidates = elect_candidates(vote, config.gassl.top_k);
        row.j_s = objective_single(row.candidates, head);
        sum_j += row.j_s;
        bundle.p1_trials.push_back(row);
        if (keep)
          write_json(root,
                     "attention_" + to_string(kind) + "_m" + std::to_string(m) + ".json",
                     artifacts_to_json(artifacts, vote), &bundle.files);
      }
      P1Cell cell;
      cell.ifs = to_string(kind);
      cell.m = m;
      cell.trials = config.trials;
      cell.detection_rate = 1.0 + sum_j / static_cast<double>(config.trials);
      bundle.p1_cells.push_back(cell);
    }
  }

  std::string trials_csv = "ifs,m,trial,seed,true_head,candidates,j_s\r\n";
  for (const P1Trial& t : bundle.p1_trials)
    trials_csv += t.ifs + "," + std::to_string(t.m) + "," + std::to_string(t.trial) + "," +
                  std::to_string(t.seed) + "," + std::to_string(t.true_head) + "," +
                  join_ints(t.candidates) + "," + fmt_g(t.j_s) + "\r\n";
  write_file(root, "p1_trials.csv", trials_csv, &bundle.files);

  std::string cells_csv = "ifs,m,trials,detection_rate\r\n";
  nlohmann::json jcells = nlohmann::json::array();
  for (const P1Cell& c : bundle.p1_cells) {
    cells_csv += c.ifs + "," + std::to_string(c.m) + "," + std::to_string(c.trials) + "," +
                 fmt_g(c.detection_rate) + "\r\n";
    jcells.push_back({{"ifs", c.ifs},
                      {"m", c.m},
                      {"trials", c.trials},
                      {"detection_rate", c.detection_rate}});
  }
  write_file(root, "p1_cells.csv", cells_csv, &bundle.files);

  nlohmann::json jtrials = nlohmann::json::array();
  for (const P1Trial& t : bundle.p1_trials)
    jtrials.push_back({{"ifs", t.ifs},
                       {"m", t.m},
                       {"trial", t.trial},
                       {"seed", t.seed},
                       {"true_head", t.true_head},
                       {"candidates", t.candidates},
                       {"j_s", t.j_s}});
  write_json(root, "report.json",
             {{"problem", "p1"}, {"config", config.to_json()}, {"cells", jcells},
              {"trials", jtrials}},
             &bundle.files);
  return bundle;
}

ReportBundle run_p2_suite(const ExperimentConfig& config) {
  config.validate();
  if (config.problem != "p2") throw std::invalid_argument("run_p2_suite: problem must be p2");
  const fs::path root(config.out_dir);
  fs::create_directories(root);
  ReportBundle bundle;
  write_json(root, "config_echo.json", config.to_json(), &bundle.files);
  const GruEncoderParams w_star = obtain_encoder(config, &bundle);

  int scen_index = 0;
  for (IfsKind kind : config.ifs_kinds) {
    for (const auto& sizes : config.cluster_sizes) {
      const std::uint64_t scen_seed =
          tag_seed(config.seed, to_string(kind).c_str(), 1000 + scen_index);
      P2Scenario scen;
      scen.ifs = to_string(kind);
      scen.scenario = scen_index;
      scen.sizes = sizes;
      scen.clusters = static_cast<int>(sizes.size());
      scen.total = scen.clusters;
      for (int m : sizes) scen.total += m;
      scen.trials = config.trials;

      int successes = 0;
      double sum_rounds = 0.0, sum_red = 0.0, sum_j = 0.0;
      for (int trial = 0; trial < config.trials; ++trial) {
        const std::uint64_t trial_seed = derive_seed(scen_seed, static_cast<std::uint64_t>(trial));
        SwarmConfig sc;
        sc.cluster_sizes = sizes;
        sc.arena = config.arena;
        sc.ifs = experiment_ifs(kind, config.seed);
        SwarmState swarm = init_swarm(sc, tag_seed(trial_seed, "swarm"));

        std::vector<RoundDiag> diags;
        const DetectionHyper hyper{config.gassl, config.mc};
        const DetectionLedger ledger =
            run_detection(swarm, hyper, w_star, tag_seed(trial_seed, "detect"), &diags);

        P2Trial row;
        row.ifs = to_string(kind);
        row.scenario = scen_index;
        row.sizes = sizes;
        row.trial = trial;
        row.seed = trial_seed;
        row.success = ledger.complete;
        row.rounds = static_cast<int>(ledger.rounds.size());
        row.ledger = ledger;
        if (ledger.complete) {
          const MultiObjective mo = objective_multi(ledger, swarm.total());
          row.j_m = mo.j_m;
          row.redundancy = mo.redundancy;
          ++successes;
          sum_rounds += row.rounds;
          sum_red += mo.redundancy;
          sum_j += mo.j_m;
        }
        bundle.p2_trials.push_back(row);

        if (config.save_artifacts) {
          nlohmann::json jdiags = nlohmann::json::array();
          for (const RoundDiag& d : diags) jdiags.push_back(diag_to_json(d));
          write_json(root,
                     "ledgers/" + to_string(kind) + "_s" + std::to_string(scen_index) + "_t" +
                         std::to_string(trial) + ".json",
                     {{"ifs", to_string(kind)}, {"sizes", sizes}, {"trial", trial},
                      {"seed", trial_seed}, {"ledger", ledger_to_json(ledger)},
                      {"rounds", jdiags}},
                     &bundle.files);
        }
      }
      scen.success_rate = static_cast<double>(successes) / config.trials;
      if (successes > 0) {
        scen.mean_rounds = sum_rounds / successes;
        scen.mean_redundancy = sum_red / successes;
        scen.mean_j_m = sum_j / successes;
      }
      bundle.p2_scenarios.push_back(scen);
      ++scen_index;
    }
  }

  std::string trials_csv = "ifs,scenario,sizes,trial,seed,success,rounds,j_m,redundancy\r\n";
  for (const P2Trial& t : bundle.p2_trials)
    trials_csv += t.ifs + "," + std::to_string(t.scenario) + "," + join_ints(t.sizes) + "," +
                  std::to_string(t.trial) + "," + std::to_string(t.seed) + "," +
                  (t.success ? "1" : "0") + "," + std::to_string(t.rounds) + "," +
                  fmt_g(t.j_m) + "," + fmt_g(t.redundancy) + "\r\n";
  write_file(root, "p2_trials.csv", trials_csv, &bundle.files);

  std::string scen_csv =
      "ifs,scenario,sizes,clusters,total,trials,success_rate,mean_rounds,mean_redundancy,"
      "mean_j_m\r\n";
  nlohmann::json jscen = nlohmann::json::array();
  for (const P2Scenario& s : bundle.p2_scenarios) {
    scen_csv += s.ifs + "," + std::to_string(s.scenario) + "," + join_ints(s.sizes) + "," +
                std::to_string(s.clusters) + "," + std::to_string(s.total) + "," +
                std::to_string(s.trials) + "," + fmt_g(s.success_rate) + "," +
                fmt_g(s.mean_rounds) + "," + fmt_g(s.mean_redundancy) + "," +
                fmt_g(s.mean_j_m) + "\r\n";
    jscen.push_back({{"ifs", s.ifs},
                     {"scenario", s.scenario},
                     {"sizes", s.sizes},
                     {"clusters", s.clusters},
                     {"total", s.total},
                     {"trials", s.trials},
                     {"success_rate", s.success_rate},
                     {"mean_rounds", s.mean_rounds},
                     {"mean_redundancy", s.mean_redundancy},
                     {"mean_j_m", s.mean_j_m}});
  }
  write_file(root, "p2_scenarios.csv", scen_csv, &bundle.files);

  nlohmann::json jtrials = nlohmann::json::array();
  for (const P2Trial& t : bundle.p2_trials)
    jtrials.push_back({{"ifs", t.ifs},
                       {"scenario", t.scenario},
                       {"sizes", t.sizes},
                       {"trial", t.trial},
                       {"seed", t.seed},
                       {"success", t.success},
                       {"rounds", t.rounds},
                       {"j_m", t.j_m},
                       {"redundancy", t.redundancy}});
  write_json(root, "report.json",
             {{"problem", "p2"}, {"config", config.to_json()}, {"scenarios", jscen},
              {"trials", jtrials}},
             &bundle.files);
  return bundle;
}

ReportBundle run_meta(const ExperimentConfig& config) {
  config.validate();
  if (config.problem != "meta") throw std::invalid_argument("run_meta: problem must be meta");
  const fs::path root(config.out_dir);
  fs::create_directories(root);
  ReportBundle bundle;
  write_json(root, "config_echo.json", config.to_json(), &bundle.files);

  MetaDataset dataset = make_meta_dataset(config.mc.meta_episodes, config.mc.dataset_clusters,
                                          tag_seed(config.seed, "meta-data"));
  std::vector<double> losses;
  const GruEncoderParams w =
      meta_train(dataset, config.mc, tag_seed(config.seed, "meta-train"), &losses);
  save_encoder(w, (root / "w_star.json").string());
  bundle.files.push_back("w_star.json");

  std::string csv = "episode,query_loss\r\n";
  for (std::size_t e = 0; e < losses.size(); ++e)
    csv += std::to_string(e) + "," + fmt_g(losses[e]) + "\r\n";
  write_file(root, "meta_losses.csv", csv, &bundle.files);

  write_json(root, "report.json",
             {{"problem", "meta"},
              {"config", config.to_json()},
              {"episodes", losses.size()},
              {"first_query_loss", losses.empty() ? 0.0 : losses.front()},
              {"last_query_loss", losses.empty() ? 0.0 : losses.back()}},
             &bundle.files);
  return bundle;
}

ReportBundle compare_purity_baselines(const ExperimentConfig& config) {
  config.validate();
  if (config.problem != "purity")
    throw std::invalid_argument("compare_purity_baselines: problem must be purity");
  const fs::path root(config.out_dir);
  fs::create_directories(root);
  ReportBundle bundle;
  write_json(root, "config_echo.json", config.to_json(), &bundle.files);
  const GruEncoderParams w_star = obtain_encoder(config, &bundle);

  const std::vector<int>& sizes = config.cluster_sizes.front();
  const int m_true = static_cast<int>(sizes.size());
  for (IfsKind kind : config.ifs_kinds) {
    PurityCell cell;
    cell.ifs = to_string(kind);
    cell.trials = config.purity_seeds;
    for (int trial = 0; trial < config.purity_seeds; ++trial) {
      const std::uint64_t trial_seed =
          tag_seed(config.seed, to_string(kind).c_str(), 5000 + trial);
      SwarmConfig sc;
      sc.cluster_sizes = sizes;
      sc.arena = config.arena;
      sc.ifs = experiment_ifs(kind, config.seed);
      SwarmState swarm = init_swarm(sc, tag_seed(trial_seed, "swarm"));
      swarm.advance(config.mc.t_ob);
      const LabeledWindows data = observe_windows(swarm, swarm.live_indices());

      const Eigen::MatrixXd encoded = encode_all(w_star, data);
      Eigen::MatrixXd raw(data.size(), 3 + 3 * data.items.front().speeds.rows());
      for (int i = 0; i < data.size(); ++i) raw.row(i) = flatten_window(data.items[i]);

      PurityRow row;
      row.ifs = to_string(kind);
      row.trial = trial;
      row.seed = trial_seed;
      row.gru = clustering_purity(
          cluster_kmeans(encoded, m_true, tag_seed(trial_seed, "km-gru")).assignments,
          data.labels);
      row.raw = clustering_purity(
          cluster_kmeans(raw, m_true, tag_seed(trial_seed, "km-raw")).assignments, data.labels);
      cell.mean_gru += row.gru;
      cell.mean_raw += row.raw;
      bundle.purity_rows.push_back(row);
    }
    cell.mean_gru /= config.purity_seeds;
    cell.mean_raw /= config.purity_seeds;
    bundle.purity_cells.push_back(cell);
  }

  std::string rows_csv = "ifs,trial,seed,gru,raw\r\n";
  for (const PurityRow& r : bundle.purity_rows)
    rows_csv += r.ifs + "," + std::to_string(r.trial) + "," + std::to_string(r.seed) + "," +
                fmt_g(r.gru) + "," + fmt_g(r.raw) + "\r\n";
  write_file(root, "purity_rows.csv", rows_csv, &bundle.files);

  std::string cells_csv = "ifs,trials,mean_gru,mean_raw\r\n";
  nlohmann::json jcells = nlohmann::json::array();
  for (const PurityCell& c : bundle.purity_cells) {
    cells_csv += c.ifs + "," + std::to_string(c.trials) + "," + fmt_g(c.mean_gru) + "," +
                 fmt_g(c.mean_raw) + "\r\n";
    jcells.push_back({{"ifs", c.ifs},
                      {"trials", c.trials},
                      {"mean_gru", c.mean_gru},
                      {"mean_raw", c.mean_raw}});
  }
  write_file(root, "purity_cells.csv", cells_csv, &bundle.files);
  write_json(root, "report.json",
             {{"problem", "purity"}, {"config", config.to_json()}, {"cells", jcells}},
             &bundle.files);
  return bundle;
}

std::vector<std::string> emit_attention_heatmap(const std::string& run_dir) {
  const fs::path root(run_dir);
  if (!fs::is_directory(root))
    throw std::invalid_argument("heatmap: not a directory: " + run_dir);
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("attention_", 0) == 0 && name.size() > 5 &&
        name.substr(name.size() - 5) == ".json")
      inputs.push_back(entry.path());
  }
  if (inputs.empty())
    throw std::invalid_argument("heatmap: no attention_*.json artifacts in " + run_dir);
  std::sort(inputs.begin(), inputs.end());

  std::vector<std::string> written;
  for (const fs::path& path : inputs) {
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    const auto members = j.at("members").get<std::vector<int>>();
    const std::string stem = path.stem().string();
    write_file(root, stem + "_mean.csv", matrix_csv(members, mat_from_json(j.at("weight_matrix"))),
               &written);
    const auto& heads = j.at("head_matrices");
    for (std::size_t h = 0; h < heads.size(); ++h)
      write_file(root, stem + "_head" + std::to_string(h) + ".csv",
                 matrix_csv(members, mat_from_json(heads[h])), &written);
  }
  return written;
}

}  // namespace swarmdet
