#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stdgmrf/datagen.hpp"
#include "stdgmrf/graph.hpp"
#include "stdgmrf/oracle.hpp"
#include "stdgmrf/types.hpp"
#include "stdgmrf/vi.hpp"

namespace stdgmrf {

std::string variant_to_string(TemporalVariant v);
TemporalVariant variant_from_string(const std::string& s);

// Dataset directory: truth.csv (k,node,value), obs.csv (k,node,value,sigma),
// splits.csv (k,node,role), meta.json (generator config incl. jitter delta).
void write_dataset(const std::string& dir, const SyntheticDataset& ds);
SyntheticDataset read_dataset(const std::string& dir);

// Model structure needed to rebuild parameter shapes from a checkpoint.
struct CheckpointInfo {
  int side = 0;
  int n_steps = 0;
  int markov_order = 1;
  int l_spatial = 2;
  int l_temporal = 0;
  std::string temporal_variant = "advdiff";
  bool time_invariant = true;
  bool vi_temporal = false;
};

// Checkpoint: text header (magic, config JSON, block manifest) followed by
// the flat parameter vector as little-endian f64 payload.
void write_checkpoint(const std::string& path, const CheckpointInfo& info,
                      const ModelParams& m, const VariationalParams& vp);
struct Checkpoint {
  CheckpointInfo info;
  ModelParams model;
  VariationalParams variational;
};
Checkpoint read_checkpoint(const std::string& path, const GraphSpec& g);
// Builds empty parameter structures matching a checkpoint config.
std::pair<ModelParams, VariationalParams> make_skeleton(const CheckpointInfo& info,
                                                        const GraphSpec& g);

void write_loss_csv(const std::string& path, const std::vector<double>& elbo_trace);
void write_posterior_csv(const std::string& path, const Vec& mean, const Vec& std_dev,
                         int n_nodes);
// returns (mean, std); sizes validated against n_steps * n_nodes
std::pair<Vec, Vec> read_posterior_csv(const std::string& path, int n_steps, int n_nodes);
void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

// Graph file: header `src,dst,weight[,nx,ny]`, 0-based ids. Undirected files
// list each edge once; load_graph adds the symmetric closure.
std::vector<EdgeRecord> read_graph_csv(const std::string& path);

}  // namespace stdgmrf
