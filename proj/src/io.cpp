#include "stdgmrf/io.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "stdgmrf/errors.hpp"

namespace stdgmrf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path, std::ios_base::openmode mode = std::ios_base::out) {
  std::ofstream f(path, mode);
  if (!f) throw InvalidInput("cannot open " + path + " for writing");
  f << std::setprecision(std::numeric_limits<double>::max_digits10);
  return f;
}

std::ifstream open_in(const std::string& path, std::ios_base::openmode mode = std::ios_base::in) {
  std::ifstream f(path, mode);
  if (!f) throw InvalidInput("cannot open " + path);
  return f;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

const char* role_name(Role r) {
  switch (r) {
    case Role::Train: return "train";
    case Role::Val: return "val";
    case Role::Test: return "test";
  }
  return "?";
}

Role role_from(const std::string& s) {
  if (s == "train") return Role::Train;
  if (s == "val") return Role::Val;
  if (s == "test") return Role::Test;
  throw InvalidInput("unknown role " + s);
}

}  // namespace

std::string variant_to_string(TemporalVariant v) {
  switch (v) {
    case TemporalVariant::AR: return "ar";
    case TemporalVariant::Diffusion: return "diffusion";
    case TemporalVariant::DirectedFlow: return "directed";
    case TemporalVariant::AdvectionDiffusion: return "advdiff";
  }
  return "?";
}

TemporalVariant variant_from_string(const std::string& s) {
  if (s == "ar") return TemporalVariant::AR;
  if (s == "diffusion") return TemporalVariant::Diffusion;
  if (s == "directed") return TemporalVariant::DirectedFlow;
  if (s == "advdiff") return TemporalVariant::AdvectionDiffusion;
  throw InvalidInput("unknown temporal variant " + s);
}

void write_dataset(const std::string& dir, const SyntheticDataset& ds) {
  fs::create_directories(dir);
  const int n = ds.side * ds.side;
  {
    auto f = open_out(dir + "/truth.csv");
    f << "k,node,value\n";
    for (int k = 0; k < ds.n_steps(); ++k)
      for (int i = 0; i < n; ++i)
        f << k << ',' << i << ',' << ds.truth[static_cast<Eigen::Index>(k) * n + i] << '\n';
  }
  {
    auto f = open_out(dir + "/obs.csv");
    f << "k,node,value,sigma\n";
    for (int k = 0; k < ds.n_steps(); ++k)
      for (const auto& o : ds.observations.steps[k])
        f << k << ',' << o.node << ',' << o.value << ',' << o.sigma << '\n';
  }
  {
    auto f = open_out(dir + "/splits.csv");
    f << "k,node,role\n";
    for (int k = 0; k < ds.n_steps(); ++k)
      for (int i = 0; i < n; ++i)
        f << k << ',' << i << ',' << role_name(ds.roles[static_cast<size_t>(k) * n + i]) << '\n';
  }
  {
    json meta;
    meta["side"] = ds.side;
    meta["n_nodes"] = n;
    meta["k"] = ds.sim.n_transitions;
    meta["d_diff"] = ds.sim.d_diff;
    meta["velocity"] = {ds.sim.velocity[0], ds.sim.velocity[1]};
    meta["steps_per_frame"] = ds.sim.steps_per_frame;
    meta["noise_scale"] = ds.sim.noise_scale;
    meta["s0_jitter"] = ds.sim.s0_jitter;
    meta["sim_seed"] = ds.sim.seed;
    meta["mask_width"] = ds.mask.width;
    meta["mask_start"] = ds.mask.start_step;
    meta["mask_len"] = ds.mask.length;
    meta["mask_corner_row"] = ds.mask.corner_row;
    meta["mask_corner_col"] = ds.mask.corner_col;
    meta["sigma"] = ds.mask.sigma;
    meta["val_frac"] = ds.mask.val_frac;
    meta["mask_seed"] = ds.mask.seed;
    auto f = open_out(dir + "/meta.json");
    f << meta.dump(2) << '\n';
  }
}

SyntheticDataset read_dataset(const std::string& dir) {
  json meta;
  open_in(dir + "/meta.json") >> meta;
  SyntheticDataset ds;
  ds.side = meta.at("side").get<int>();
  ds.sim.n_transitions = meta.at("k").get<int>();
  ds.sim.d_diff = meta.at("d_diff").get<double>();
  ds.sim.velocity[0] = meta.at("velocity")[0].get<double>();
  ds.sim.velocity[1] = meta.at("velocity")[1].get<double>();
  ds.sim.steps_per_frame = meta.at("steps_per_frame").get<int>();
  ds.sim.noise_scale = meta.at("noise_scale").get<double>();
  ds.sim.s0_jitter = meta.at("s0_jitter").get<double>();
  ds.sim.seed = meta.at("sim_seed").get<std::uint64_t>();
  ds.mask.width = meta.at("mask_width").get<int>();
  ds.mask.start_step = meta.at("mask_start").get<int>();
  ds.mask.length = meta.at("mask_len").get<int>();
  ds.mask.corner_row = meta.at("mask_corner_row").get<int>();
  ds.mask.corner_col = meta.at("mask_corner_col").get<int>();
  ds.mask.sigma = meta.at("sigma").get<double>();
  ds.mask.val_frac = meta.at("val_frac").get<double>();
  ds.mask.seed = meta.at("mask_seed").get<std::uint64_t>();

  const int n = ds.side * ds.side;
  const int n_steps = ds.n_steps();
  ds.truth = Vec::Zero(static_cast<Eigen::Index>(n_steps) * n);
  ds.roles.assign(static_cast<size_t>(n_steps) * n, Role::Train);
  ds.observations.steps.resize(n_steps);

  std::string line;
  {
    auto f = open_in(dir + "/truth.csv");
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto parts = split_csv_line(line);
      ds.truth[std::stoll(parts[0]) * n + std::stoll(parts[1])] = std::stod(parts[2]);
    }
  }
  {
    auto f = open_in(dir + "/splits.csv");
    std::getline(f, line);
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto parts = split_csv_line(line);
      ds.roles[static_cast<size_t>(std::stoll(parts[0])) * n + std::stoll(parts[1])] =
          role_from(parts[2]);
    }
  }
  {
    auto f = open_in(dir + "/obs.csv");
    std::getline(f, line);
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto parts = split_csv_line(line);
      ds.observations.steps[std::stoi(parts[0])].push_back(
          {std::stoi(parts[1]), std::stod(parts[2]), std::stod(parts[3])});
    }
  }
  return ds;
}

std::pair<ModelParams, VariationalParams> make_skeleton(const CheckpointInfo& info,
                                                        const GraphSpec& g) {
  Rng rng(0);
  ObservationSet empty;
  empty.steps.resize(info.n_steps);
  ModelParams m = make_default_model(g, info.n_steps, info.markov_order, info.l_spatial,
                                     info.l_temporal, variant_from_string(info.temporal_variant),
                                     info.time_invariant, rng);
  VariationalParams vp =
      make_default_variational(g, info.n_steps, empty, info.vi_temporal, rng);
  return {std::move(m), std::move(vp)};
}

void write_checkpoint(const std::string& path, const CheckpointInfo& info,
                      const ModelParams& m, const VariationalParams& vp) {
  json cfg;
  cfg["side"] = info.side;
  cfg["n_steps"] = info.n_steps;
  cfg["markov_order"] = info.markov_order;
  cfg["l_spatial"] = info.l_spatial;
  cfg["l_temporal"] = info.l_temporal;
  cfg["temporal_variant"] = info.temporal_variant;
  cfg["time_invariant"] = info.time_invariant;
  cfg["vi_temporal"] = info.vi_temporal;

  const Vec flat = flatten_params(m, vp);
  const auto layout = param_layout(m, vp);
  auto f = open_out(path, std::ios_base::out | std::ios_base::binary);
  f << "STDGMRF-CKPT v1\n";
  f << "config " << cfg.dump() << '\n';
  f << "params " << flat.size() << '\n';
  for (const auto& b : layout) f << "block " << b.offset << ' ' << b.length << ' ' << b.name << '\n';
  f << "payload\n";
  f.write(reinterpret_cast<const char*>(flat.data()),
          static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

Checkpoint read_checkpoint(const std::string& path, const GraphSpec& g) {
  auto f = open_in(path, std::ios_base::in | std::ios_base::binary);
  std::string line;
  std::getline(f, line);
  if (line != "STDGMRF-CKPT v1") throw InvalidInput("not a checkpoint file: " + path);
  Checkpoint ck;
  Eigen::Index count = -1;
  while (std::getline(f, line)) {
    if (line == "payload") break;
    std::stringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "config") {
      json cfg = json::parse(line.substr(7));
      ck.info.side = cfg.at("side").get<int>();
      ck.info.n_steps = cfg.at("n_steps").get<int>();
      ck.info.markov_order = cfg.at("markov_order").get<int>();
      ck.info.l_spatial = cfg.at("l_spatial").get<int>();
      ck.info.l_temporal = cfg.at("l_temporal").get<int>();
      ck.info.temporal_variant = cfg.at("temporal_variant").get<std::string>();
      ck.info.time_invariant = cfg.at("time_invariant").get<bool>();
      ck.info.vi_temporal = cfg.at("vi_temporal").get<bool>();
    } else if (tag == "params") {
      ss >> count;
    }
    // block lines carry the manifest; shapes are rebuilt from the config
  }
  if (count < 0) throw InvalidInput("checkpoint missing params count");
  Vec flat(count);
  f.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!f) throw InvalidInput("checkpoint payload truncated");
  auto [m, vp] = make_skeleton(ck.info, g);
  if (param_count(m, vp) != count) throw InvalidInput("checkpoint parameter count mismatch");
  unflatten_params(flat, m, vp);
  ck.model = std::move(m);
  ck.variational = std::move(vp);
  return ck;
}

void write_loss_csv(const std::string& path, const std::vector<double>& elbo_trace) {
  auto f = open_out(path);
  f << "iter,elbo\n";
  for (size_t i = 0; i < elbo_trace.size(); ++i) f << i + 1 << ',' << elbo_trace[i] << '\n';
}

void write_posterior_csv(const std::string& path, const Vec& mean, const Vec& std_dev,
                         int n_nodes) {
  auto f = open_out(path);
  f << "k,node,mean,std\n";
  const int n_steps = static_cast<int>(mean.size()) / n_nodes;
  for (int k = 0; k < n_steps; ++k)
    for (int i = 0; i < n_nodes; ++i) {
      const Eigen::Index idx = static_cast<Eigen::Index>(k) * n_nodes + i;
      f << k << ',' << i << ',' << mean[idx] << ',' << std_dev[idx] << '\n';
    }
}

std::pair<Vec, Vec> read_posterior_csv(const std::string& path, int n_steps, int n_nodes) {
  Vec mean = Vec::Zero(static_cast<Eigen::Index>(n_steps) * n_nodes);
  Vec std_dev = mean;
  auto f = open_in(path);
  std::string line;
  std::getline(f, line);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto parts = split_csv_line(line);
    const Eigen::Index idx = std::stoll(parts[0]) * n_nodes + std::stoll(parts[1]);
    if (idx < 0 || idx >= mean.size()) throw InvalidInput("posterior row out of range");
    mean[idx] = std::stod(parts[2]);
    std_dev[idx] = std::stod(parts[3]);
  }
  return {std::move(mean), std::move(std_dev)};
}

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
  auto f = open_out(path);
  f << "path,side,N,K,phase,seconds\n";
  for (const auto& r : rows)
    f << r.path << ',' << r.side << ',' << r.n_nodes << ',' << r.k << ',' << r.phase << ','
      << r.seconds << '\n';
}

std::vector<EdgeRecord> read_graph_csv(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw InvalidInput("empty graph file");
  std::vector<EdgeRecord> edges;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto parts = split_csv_line(line);
    if (parts.size() != 3 && parts.size() != 5)
      throw InvalidEdge("expected src,dst,weight[,nx,ny]");
    EdgeRecord e;
    e.src = std::stoi(parts[0]);
    e.dst = std::stoi(parts[1]);
    e.weight = std::stod(parts[2]);
    if (parts.size() == 5) {
      e.has_normal = true;
      e.nx = std::stod(parts[3]);
      e.ny = std::stod(parts[4]);
    }
    edges.push_back(e);
  }
  return edges;
}

}  // namespace stdgmrf
