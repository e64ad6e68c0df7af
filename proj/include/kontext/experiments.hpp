#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kontext/error.hpp"
#include "kontext/contextuality.hpp"
#include "kontext/estimators.hpp"
#include "kontext/hmm.hpp"
#include "kontext/model.hpp"
#include "kontext/mps.hpp"
#include "kontext/stats.hpp"

namespace kontext {

/// Raised when no (k+1)-state deterministic HMM reproduces a model inside
/// its supports within the search budget.
class CertificateUnroutable : public Error
{
public:
  using Error::Error;
};

struct BenchmarkOptions
{
  std::size_t                greedy_permutations = 1;
  std::uint64_t              seed                = 0;
  std::optional<std::size_t> max_rank;  // default_max_rank when absent
  EstimatorBudget            budget = {};
  bool                       timings = true;
};

struct BenchmarkRow
{
  std::size_t   model_index = 0;
  int           k_exact     = 0;
  int           k_greedy    = 0;
  int           k_coloring  = 0;
  double        exact_ms    = 0.0;
  double        greedy_ms   = 0.0;
  double        coloring_ms = 0.0;
  std::uint64_t exact_nodes   = 0;
  std::uint64_t subset_checks = 0;
  std::uint64_t edge_checks   = 0;
};

std::vector<BenchmarkRow> estimator_benchmark(std::span<EmpiricalModel const> models, BenchmarkOptions const &options);

struct OverestimateHistogram
{
  std::map<int, std::size_t> greedy;
  std::map<int, std::size_t> coloring;
};

OverestimateHistogram overestimate_histogram(std::span<BenchmarkRow const> rows);

/// Deterministic HMM with `states` states whose every context output lies in
/// the context's support, found by a backtracking search over its transition
/// and emission table. Throws CertificateUnroutable when none is found within
/// `max_nodes` search nodes.
Hmm certificate_hmm(EmpiricalModel const &model, int states, std::uint64_t max_nodes = 1'000'000);

struct Lemma1Options
{
  std::size_t      restarts        = 5;
  BaumWelchOptions baum_welch      = {};
  /// Unsupported outcome mass above this counts as a leak.
  double           leak_threshold  = 1e-3;
  PartitionBudget  partition_budget = {};
  std::uint64_t    certificate_nodes = 1'000'000;
  bool             train           = true;
};

struct TrainedCheck
{
  int    states           = 0;
  double kl_target_model  = 0.0;  // D(e || p)
  double kl_model_target  = 0.0;  // D(p || e)
  double max_leaked_mass  = 0.0;
  bool   leaks            = false;  // max_leaked_mass > leak_threshold
  std::size_t coverage_gaps = 0;    // support_violation at eps = 0
};

struct Lemma1Report
{
  int                        k = 0;
  std::vector<std::uint64_t> n_e;  // m = 1 .. k + 1
  bool                       definitional_ok = false;
  bool                       certificate_built = false;
  std::string                certificate_error;
  bool                       certificate_clean = false;  // no leaks at eps 0
  double                     certificate_kl_model_target = 0.0;
  std::vector<TrainedCheck>  trained;  // m = 1 .. k
};

/// Checks the hidden-state lower bound for a model with contextuality
/// number k: the partition counts vanish exactly below k + 1 parts, a
/// (k+1)-state certificate HMM stays inside every support, and trained HMMs
/// with at most k states do not.
Lemma1Report lemma1_verify(EmpiricalModel const &model, int k, Lemma1Options const &options = {});

struct SweepModel
{
  std::string    id;
  std::string    family;
  int            n        = 0;
  int            sparsity = 0;
  EmpiricalModel model;
  /// Token count N of the likelihood-ratio test; contexts times query
  /// length when absent.
  std::optional<double> n_tokens;
};

struct SweepSpec
{
  std::vector<SweepModel> models;
  std::vector<int>        dims;
  std::size_t             classical_restarts = 5;
  std::size_t             quantum_restarts   = 3;
  BaumWelchOptions        baum_welch         = {};
  QhmmOptions             qhmm               = {};
  std::uint64_t           seed               = 0;
  std::size_t             greedy_permutations = 100;
  /// Exact k is computed for models with at most this many contexts.
  std::size_t             exact_max_contexts = 10;
  std::optional<double>   df;
  bool                    timings = false;
  std::size_t             threads = 1;
};

struct GapRecord
{
  std::string   model_id;
  std::string   family;
  int           n        = 0;
  int           sparsity = 0;
  std::optional<int> k_true;
  int           k_est = 0;
  std::string   k_method;
  int           m = 0;
  double        kl_classical = 0.0;
  double        kl_quantum   = 0.0;
  std::optional<double> gap;
  double        ll_c = 0.0;
  double        ll_q = 0.0;
  LrTestResult  lr;
  double        runtime_c_ms = 0.0;
  double        runtime_q_ms = 0.0;
  std::uint64_t seed         = 0;
  std::string   error;
};

std::vector<GapRecord> gap_sweep(SweepSpec const &spec);

/// CSV text with a header row; "inf" marks infinite KL, empty cells mark
/// absent values.
std::string gap_records_csv(std::span<GapRecord const> records);

}  // namespace kontext
