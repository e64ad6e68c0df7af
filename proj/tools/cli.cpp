#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>
#include <toml.hpp>

#include "kontext/error.hpp"
#include "kontext/estimators.hpp"
#include "kontext/experiments.hpp"
#include "kontext/generators.hpp"
#include "kontext/hmm.hpp"
#include "kontext/hmm_io.hpp"
#include "kontext/ingest.hpp"
#include "kontext/model_io.hpp"
#include "kontext/mps.hpp"
#include "kontext/parallel.hpp"
#include "kontext/stats.hpp"

namespace kontext::cli {

namespace {

namespace fs = std::filesystem;
using json   = nlohmann::ordered_json;
using Clock  = std::chrono::steady_clock;

json number(double v)
{
  if (std::isinf(v))
  {
    return v > 0 ? "inf" : "-inf";
  }
  if (std::isnan(v))
  {
    return "nan";
  }
  return v;
}

void check_output_path(std::string const &path)
{
  if (path.empty())
  {
    return;
  }
  auto const parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent))
  {
    throw CLI::ValidationError("output directory does not exist: " + parent.string());
  }
}

void emit(std::string const &path, std::string const &text, std::ostream &out)
{
  if (path.empty())
  {
    out << text;
  }
  else
  {
    write_file_atomically(path, text);
  }
}

json section_json(Section const &s)
{
  return json{{"domain", s.domain}, {"values", s.values}};
}

json partition_json(GreedyPartition const &p)
{
  json sections = json::array();
  for (auto const &s : p.witness_sections)
  {
    sections.push_back(section_json(s));
  }
  return json{{"parts", p.parts}, {"witness_sections", std::move(sections)}};
}

// ---------------------------------------------------------------- generate

struct GenerateArgs
{
  std::string   family;
  int           n                = 0;
  int           sparsity         = 1;
  std::optional<int> target_k;
  std::uint64_t seed             = 0;
  std::string   draw             = "pool";
  std::size_t   max_resamples    = 100'000;
  int           contexts         = 0;
  int           obs_per_context  = 2;
  int           max_particles    = kMaxGhzParticles;
  std::string   out;
  bool          pretty           = false;
};

EmpiricalModel generate_model(GenerateArgs const &a)
{
  if (a.family == "random")
  {
    if (a.n < 2)
    {
      throw CLI::ValidationError("--n must be at least 2 for random models");
    }
    RandomModelSpec spec;
    spec.n             = a.n;
    spec.sparsity      = a.sparsity;
    spec.seed          = a.seed;
    spec.target_k      = a.target_k;
    spec.draw          = a.draw == "full" ? SupportDraw::FullSpace : SupportDraw::SharedPool;
    spec.max_resamples = a.max_resamples;
    return random_model(spec);
  }
  if (a.family == "ghz")
  {
    if (a.n < 2)
    {
      throw CLI::ValidationError("--n must be at least 2 for GHZ models");
    }
    return ghz_model(a.n, a.max_particles);
  }
  int const contexts = a.contexts > 0 ? a.contexts : a.n;
  if (contexts < 1)
  {
    throw CLI::ValidationError("noncontextual models need --contexts or --n");
  }
  return noncontextual_model(contexts, a.obs_per_context, a.seed);
}

void add_generate(CLI::App &app, GenerateArgs &a)
{
  auto *cmd = app.add_subcommand("generate", "Write a benchmark empirical model as JSON");
  cmd->add_option("--family", a.family, "Model family")
    ->required()
    ->check(CLI::IsMember({"random", "ghz", "noncontextual"}));
  cmd->add_option("--n", a.n, "Size: contexts, observables and outcomes (random) or particles (ghz)");
  cmd->add_option("--sparsity", a.sparsity, "Support size per context (random)")->check(CLI::PositiveNumber);
  cmd->add_option("--target-k", a.target_k, "Redraw until the contextuality number equals this (random)");
  cmd->add_option("--seed", a.seed, "Random seed");
  cmd->add_option("--support-draw", a.draw, "Draw supports from a shared pool or the full outcome space")
    ->check(CLI::IsMember({"pool", "full"}));
  cmd->add_option("--max-resamples", a.max_resamples, "Redraw limit for --target-k")->check(CLI::PositiveNumber);
  cmd->add_option("--contexts", a.contexts, "Context count (noncontextual; 0 uses --n)");
  cmd->add_option("--obs-per-context", a.obs_per_context, "Observables per context (noncontextual)")
    ->check(CLI::PositiveNumber);
  cmd->add_option("--max-particles", a.max_particles, "Largest GHZ size accepted");
  cmd->add_option("--out", a.out, "Output file (stdout when empty)");
  cmd->add_flag("--pretty", a.pretty, "Indent the JSON");
}

// ------------------------------------------------------------------ ingest

struct IngestArgs
{
  std::string   corpus;
  std::string   format    = "plain";
  int           n         = 4;
  int           stride    = 1;
  int           min_count = 2;
  int           pad_to    = 0;
  std::uint64_t seed      = 0;
  std::string   alphabet;
  int           column    = -1;
  bool          header    = false;
  bool          keep_case = false;
  std::string   out;
  bool          pretty = false;
};

CorpusOptions corpus_options(std::string const &format, std::string const &alphabet, int column, bool header,
                             bool keep_case)
{
  CorpusOptions o;
  o.format     = format == "fasta" ? CorpusFormat::Fasta : format == "csv" ? CorpusFormat::Csv : CorpusFormat::Plain;
  o.csv_column = column;
  o.csv_header = header;
  o.fold_case  = !keep_case;
  if (!alphabet.empty())
  {
    std::vector<std::string> tokens;
    for (char ch : alphabet)
    {
      tokens.emplace_back(1, ch);
    }
    o.alphabet = std::move(tokens);
  }
  return o;
}

void add_ingest(CLI::App &app, IngestArgs &a)
{
  auto *cmd = app.add_subcommand("ingest", "Turn a token corpus into a windowed empirical model");
  cmd->add_option("corpus", a.corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--format", a.format, "Corpus format")->check(CLI::IsMember({"plain", "fasta", "csv"}));
  cmd->add_option("--n", a.n, "Window length")->check(CLI::PositiveNumber);
  cmd->add_option("--stride", a.stride, "Window step")->check(CLI::PositiveNumber);
  cmd->add_option("--min-count", a.min_count, "Minimum occurrences of a prefix")->check(CLI::PositiveNumber);
  cmd->add_option("--pad-to", a.pad_to, "Pad sequences with random tokens to this length (0 disables)")
    ->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", a.seed, "Padding seed");
  cmd->add_option("--alphabet", a.alphabet, "Fixed token order, one character per token");
  cmd->add_option("--column", a.column, "csv column, negative counts from the end");
  cmd->add_flag("--header", a.header, "csv has a header row");
  cmd->add_flag("--keep-case", a.keep_case, "Do not upper-case tokens");
  cmd->add_option("--out", a.out, "Output file (stdout when empty)");
  cmd->add_flag("--pretty", a.pretty, "Indent the JSON");
}

WindowedModel ingest_model(IngestArgs const &a)
{
  Corpus corpus = load_corpus(a.corpus, corpus_options(a.format, a.alphabet, a.column, a.header, a.keep_case));
  if (a.pad_to > 0)
  {
    corpus = pad_sequences(corpus, a.pad_to, a.seed);
  }
  return windowed_model(corpus, {a.n, a.stride, a.min_count});
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs
{
  std::string   model;
  std::string   method   = "greedy";
  std::size_t   perms    = 100;
  std::uint64_t seed     = 0;
  std::size_t   max_rank = 0;
  std::uint64_t budget   = 100'000'000;
  std::size_t   threads  = default_thread_count();
  bool          timings  = false;
};

void add_estimate(CLI::App &app, EstimateArgs &a)
{
  auto *cmd = app.add_subcommand("estimate", "Estimate the contextuality number of a model");
  cmd->add_option("model", a.model, "Model JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--method", a.method, "Estimator")->check(CLI::IsMember({"exact", "greedy", "coloring"}));
  cmd->add_option("--perms", a.perms, "Sampled orderings (greedy)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "Ordering seed (greedy)");
  cmd->add_option("--max-rank", a.max_rank, "Hyperedge rank (coloring; 0 uses d + 1)");
  cmd->add_option("--budget", a.budget, "Search nodes (exact) or subset checks (coloring)")
    ->check(CLI::PositiveNumber);
  cmd->add_option("--threads", a.threads, "Worker threads (greedy)")->check(CLI::PositiveNumber);
  cmd->add_flag("--timings", a.timings, "Report wall-clock runtime instead of 0");
}

json run_estimate(EstimateArgs const &a)
{
  EmpiricalModel const model = load_model(a.model);
  EstimatorBudget      budget;
  budget.max_search_nodes  = a.budget;
  budget.max_subset_checks = a.budget;

  json       result;
  auto const t0 = Clock::now();
  result["method"] = a.method;
  if (a.method == "exact")
  {
    auto const r            = exact_bruteforce(model, budget);
    result["k"]             = r.k;
    result["search_nodes"]  = r.search_nodes;
    result["certificate"]   = partition_json(r.certificate);
  }
  else if (a.method == "greedy")
  {
    auto const r   = greedy_estimate(model, a.perms, a.seed, a.threads, budget);
    result["k"]    = r.final_k;
    result["seed"] = r.seed;
    json trace     = json::array();
    for (auto const &p : r.trace)
    {
      trace.push_back({p.iteration, p.best_k});
    }
    result["trace"]       = std::move(trace);
    result["certificate"] = partition_json(r.certificate);
  }
  else
  {
    std::size_t const rank  = a.max_rank > 0 ? a.max_rank : default_max_rank(model);
    auto const        graph = build_hypergraph(model, std::max<std::size_t>(2, rank), budget);
    auto const        color = coloring_estimate(graph, identity_order(model.num_contexts()));
    result["k"]             = color.k;
    result["max_rank"]      = std::max<std::size_t>(2, rank);
    result["subset_checks"] = graph.subset_checks;
    result["edge_checks"]   = color.edge_checks;
    json classes            = json::array();
    for (auto const &cls : color.colors)
    {
      std::vector<int> ids;
      for (std::size_t c : cls)
      {
        ids.push_back(model.context(c).id);
      }
      std::sort(ids.begin(), ids.end());
      classes.push_back(ids);
    }
    json edges = json::array();
    for (auto const &e : graph.edges)
    {
      std::vector<int> ids;
      for (std::size_t c : e)
      {
        ids.push_back(model.context(c).id);
      }
      edges.push_back(ids);
    }
    result["certificate"] = json{{"colors", std::move(classes)}, {"edges", std::move(edges)}};
  }
  double const ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  // runtime_ms goes right after k
  json ordered;
  for (auto it = result.begin(); it != result.end(); ++it)
  {
    ordered[it.key()] = it.value();
    if (it.key() == "k")
    {
      ordered["runtime_ms"] = a.timings ? ms : 0.0;
    }
  }
  return ordered;
}

// ------------------------------------------------------------------- train

struct TrainArgs
{
  std::string   model;
  std::string   kind      = "hmm";
  int           states    = 2;
  int           bond_dim  = 2;
  std::size_t   steps     = 2000;
  double        lr        = 0.05;
  std::size_t   max_iters = 500;
  double        tol       = 1e-7;
  std::size_t   restarts  = 0;
  std::uint64_t seed      = 0;
  std::size_t   threads   = default_thread_count();
  std::string   out;
  std::string   report;
};

void add_train(CLI::App &app, TrainArgs &a)
{
  auto *cmd = app.add_subcommand("train", "Fit a classical HMM or a QHMM to a model");
  cmd->add_option("target", a.model, "Model JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--model", a.kind, "Model class")->check(CLI::IsMember({"hmm", "qhmm"}));
  cmd->add_option("--states", a.states, "Hidden states (hmm)")->check(CLI::PositiveNumber);
  cmd->add_option("--bond-dim", a.bond_dim, "Bond dimension (qhmm)")->check(CLI::PositiveNumber);
  cmd->add_option("--steps", a.steps, "Gradient steps (qhmm)")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", a.lr, "Learning rate (qhmm)")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iters", a.max_iters, "EM iterations (hmm)")->check(CLI::PositiveNumber);
  cmd->add_option("--tol", a.tol, "EM log-likelihood tolerance (hmm)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--restarts", a.restarts, "Restarts, best KL kept (0 uses 5 for hmm, 3 for qhmm)");
  cmd->add_option("--seed", a.seed, "Initialisation seed");
  cmd->add_option("--threads", a.threads, "Worker threads (qhmm)")->check(CLI::PositiveNumber);
  cmd->add_option("--out", a.out, "Trained model file: HMM JSON or QMPS binary")->required();
  cmd->add_option("--report", a.report, "Training report JSON");
}

json run_train(TrainArgs const &a)
{
  check_output_path(a.out);
  check_output_path(a.report);
  EmpiricalModel const model = load_model(a.model);
  json                 report;
  if (a.kind == "hmm")
  {
    BaumWelchOptions o;
    o.max_iters     = a.max_iters;
    o.tol           = a.tol;
    o.seed          = a.seed;
    auto const [h, r] = baum_welch_best(model, a.states, a.restarts > 0 ? a.restarts : 5, o);
    write_file_atomically(a.out, hmm_to_json(h));
    report["model"]          = "hmm";
    report["states"]         = a.states;
    report["log_likelihood"] = r.log_likelihood;
    report["kl"]             = number(r.kl);
    report["iterations"]     = r.iterations;
    report["converged"]      = r.converged;
    report["seed"]           = r.seed;
  }
  else
  {
    QhmmOptions o;
    o.bond_dim          = a.bond_dim;
    o.steps             = a.steps;
    o.lr                = a.lr;
    o.seed              = a.seed;
    o.threads           = a.threads;
    auto const [mps, r] = train_qhmm_best(model, o, a.restarts > 0 ? a.restarts : 3);
    write_file_atomically(a.out, mps_to_bytes(mps));
    report["model"]         = "qhmm";
    report["bond_dim"]      = a.bond_dim;
    report["nll"]           = r.nll;
    report["gradient_norm"] = r.gradient_norm;
    report["kl"]            = number(r.kl);
    report["seed"]          = r.seed;
  }
  if (!a.report.empty())
  {
    write_file_atomically(a.report, report.dump(2) + "\n");
  }
  return json{{"model", a.kind}, {"out", a.out}, {"kl", report["kl"]}};
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs
{
  std::string model;
  std::string trained;
  double      eps      = 0.0;
  double      leak_eps = 1e-3;
};

void add_evaluate(CLI::App &app, EvaluateArgs &a)
{
  auto *cmd = app.add_subcommand("evaluate", "Score a trained HMM or QHMM against a model");
  cmd->add_option("model", a.model, "Model JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--trained", a.trained, "HMM JSON or QMPS file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--eps", a.eps, "Supported outcomes below this probability are reported")
    ->check(CLI::NonNegativeNumber);
  cmd->add_option("--leak-eps", a.leak_eps, "Unsupported outcomes above this probability are reported (hmm)")
    ->check(CLI::NonNegativeNumber);
}

json events_json(std::vector<SupportEvent> const &events)
{
  json out = json::array();
  for (auto const &e : events)
  {
    out.push_back(json{{"context", e.context}, {"outcome", e.outcome}, {"target_p", e.target_p}, {"model_p", e.model_p}});
  }
  return out;
}

json run_evaluate(EvaluateArgs const &a)
{
  EmpiricalModel const model = load_model(a.model);
  std::string const    bytes = read_file(a.trained);
  json                 result;
  if (bytes.rfind("QMPS", 0) == 0)
  {
    MpsModel const mps = mps_from_bytes(bytes);
    auto const     enc = encode_sequences(model);
    double         worst_leak = 0.0;
    json           gaps       = json::array();
    for (std::size_t c = 0; c < model.num_contexts(); ++c)
    {
      double inside = 0.0;
      for (auto const &entry : model.distribution(c).entries)
      {
        double const p = output_prob(mps, enc.contexts[c].inputs, enc.contexts[c].outputs_for(entry.outcome));
        inside += p;
        if (p < a.eps || p <= 0.0)
        {
          gaps.push_back(json{{"context", c}, {"outcome", entry.outcome}, {"target_p", entry.p}, {"model_p", p}});
        }
      }
      worst_leak = std::max(worst_leak, 1.0 - inside);
    }
    result["model"]             = "qhmm";
    result["kl_target_model"]   = number(kl_divergence(model, mps));
    result["log_likelihood"]    = number(average_log_likelihood(model, mps));
    result["max_leaked_mass"]   = std::max(0.0, worst_leak);
    result["support_violation"] = std::move(gaps);
    return result;
  }
  Hmm const  h     = hmm_from_json(bytes);
  auto const leaks = leaked_mass(model, h);
  result["model"]             = "hmm";
  result["kl_target_model"]   = number(kl_divergence(model, h));
  result["kl_model_target"]   = number(kl_divergence_model_to_target(model, h));
  result["log_likelihood"]    = number(average_log_likelihood(model, h));
  result["max_leaked_mass"]   = *std::max_element(leaks.begin(), leaks.end());
  result["support_violation"] = events_json(support_violation(model, h, a.eps));
  result["support_leaks"]     = events_json(support_leaks(model, h, a.leak_eps));
  return result;
}

// ------------------------------------------------------------------- sweep

struct SweepArgs
{
  std::string              config;
  std::string              out;
  std::optional<std::uint64_t> seed;
  std::vector<int>         dims;
  bool                     timings = false;
  std::size_t              threads = default_thread_count();
  std::optional<std::size_t> steps;
  std::optional<double>    lr;
  std::optional<std::size_t> classical_restarts;
  std::optional<std::size_t> quantum_restarts;
  std::optional<double>    df;
};

void add_sweep(CLI::App &app, SweepArgs &a)
{
  auto *cmd = app.add_subcommand("sweep", "Train both model classes over a grid and write a CSV");
  cmd->add_option("--config", a.config, "Sweep TOML; flags override its values")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "CSV output (config key out)");
  cmd->add_option("--seed", a.seed, "Base seed (config key seed, default 0)");
  cmd->add_option("--dims", a.dims, "Hidden-state / bond dimensions (config key dims)")->check(CLI::PositiveNumber);
  cmd->add_flag("--timings", a.timings, "Record wall-clock runtimes instead of 0");
  cmd->add_option("--threads", a.threads, "Worker threads across cells")->check(CLI::PositiveNumber);
  cmd->add_option("--steps", a.steps, "QHMM gradient steps (config qhmm.steps, default 2000)");
  cmd->add_option("--lr", a.lr, "QHMM learning rate (config qhmm.lr, default 0.05)");
  cmd->add_option("--classical-restarts", a.classical_restarts, "HMM restarts (config key, default 5)");
  cmd->add_option("--quantum-restarts", a.quantum_restarts, "QHMM restarts (config key, default 3)");
  cmd->add_option("--df", a.df, "Likelihood-ratio degrees of freedom (default: parameter difference, at least 1)");
}

template <typename T>
T toml_get(toml::table const &t, std::string_view key, T fallback)
{
  if (auto v = t[key].value<T>())
  {
    return *v;
  }
  return fallback;
}

std::vector<SweepModel> sweep_models(toml::table const &root, fs::path const &base)
{
  std::vector<SweepModel> models;
  auto const             *list = root["models"].as_array();
  if (!list)
  {
    throw ParseError("sweep config needs a [[models]] array", 1);
  }
  for (auto const &node : *list)
  {
    auto const *t = node.as_table();
    if (!t)
    {
      throw ParseError("each models entry must be a table", node.source().begin.line);
    }
    std::string const id     = toml_get<std::string>(*t, "id", "");
    std::string const family = toml_get<std::string>(*t, "family", "");
    auto const        seed   = static_cast<std::uint64_t>(toml_get<std::int64_t>(*t, "seed", 0));
    auto const        count  = toml_get<std::int64_t>(*t, "count", 1);
    int const         n      = static_cast<int>(toml_get<std::int64_t>(*t, "n", 0));
    auto              name   = [&](std::int64_t i, std::string const &stem) {
      std::string base_id = id.empty() ? stem : id;
      return count > 1 ? base_id + "-" + std::to_string(i) : base_id;
    };

    if (auto file = (*t)["file"].value<std::string>())
    {
      auto model = load_model(base / *file);
      models.push_back({id.empty() ? fs::path(*file).stem().string() : id, family.empty() ? "file" : family,
                        model.num_observables(), static_cast<int>(model.max_support_size()), std::move(model), {}});
    }
    else if (auto corpus = (*t)["corpus"].value<std::string>())
    {
      IngestArgs a;
      a.corpus    = (base / *corpus).string();
      a.format    = toml_get<std::string>(*t, "format", "plain");
      a.n         = n > 0 ? n : 4;
      a.stride    = static_cast<int>(toml_get<std::int64_t>(*t, "stride", 1));
      a.min_count = static_cast<int>(toml_get<std::int64_t>(*t, "min_count", 2));
      a.pad_to    = static_cast<int>(toml_get<std::int64_t>(*t, "pad_to", 0));
      a.seed      = seed;
      a.alphabet  = toml_get<std::string>(*t, "alphabet", "");
      a.column    = static_cast<int>(toml_get<std::int64_t>(*t, "column", -1));
      auto w      = ingest_model(a);
      double tokens = 0.0;
      for (auto c : w.counts)
      {
        tokens += static_cast<double>(c) * a.n;
      }
      models.push_back({id.empty() ? fs::path(*corpus).stem().string() + "-n" + std::to_string(a.n) : id,
                        family.empty() ? "corpus" : family, a.n, static_cast<int>(w.model.max_support_size()),
                        std::move(w.model), tokens});
    }
    else if (family == "random")
    {
      int const sparsity = static_cast<int>(toml_get<std::int64_t>(*t, "sparsity", 1));
      for (std::int64_t i = 0; i < count; ++i)
      {
        RandomModelSpec spec;
        spec.n        = n;
        spec.sparsity = sparsity;
        spec.seed     = seed + static_cast<std::uint64_t>(i);
        if (auto k = (*t)["target_k"].value<std::int64_t>())
        {
          spec.target_k = static_cast<int>(*k);
        }
        spec.draw = toml_get<std::string>(*t, "support_draw", "pool") == "full" ? SupportDraw::FullSpace
                                                                                 : SupportDraw::SharedPool;
        std::string stem = "random-n" + std::to_string(n) + "-s" + std::to_string(sparsity);
        if (spec.target_k)
        {
          stem += "-k" + std::to_string(*spec.target_k);
        }
        models.push_back({name(i, stem), "random", n, sparsity, random_model(spec), {}});
      }
    }
    else if (family == "ghz")
    {
      auto model = ghz_model(n);
      models.push_back({id.empty() ? "ghz-" + std::to_string(n) : id, "ghz", n,
                        static_cast<int>(model.max_support_size()), std::move(model), {}});
    }
    else if (family == "noncontextual")
    {
      int const obs = static_cast<int>(toml_get<std::int64_t>(*t, "obs_per_context", 2));
      for (std::int64_t i = 0; i < count; ++i)
      {
        auto model = noncontextual_model(n, obs, seed + static_cast<std::uint64_t>(i));
        models.push_back({name(i, "noncontextual-" + std::to_string(n)), "noncontextual", n,
                          static_cast<int>(model.max_support_size()), std::move(model), {}});
      }
    }
    else
    {
      throw ParseError("models entry needs family random|ghz|noncontextual, file or corpus",
                       node.source().begin.line);
    }
  }
  return models;
}

json run_sweep(SweepArgs const &a)
{
  toml::table root;
  try
  {
    root = toml::parse_file(a.config);
  }
  catch (toml::parse_error const &e)
  {
    throw ParseError(std::string(e.description()), e.source().begin.line);
  }
  fs::path const base = fs::path(a.config).parent_path();

  SweepSpec spec;
  spec.seed = static_cast<std::uint64_t>(toml_get<std::int64_t>(root, "seed", 0));
  if (auto const *dims = root["dims"].as_array())
  {
    for (auto const &d : *dims)
    {
      spec.dims.push_back(static_cast<int>(d.value<std::int64_t>().value_or(0)));
    }
  }
  spec.classical_restarts  = static_cast<std::size_t>(toml_get<std::int64_t>(root, "classical_restarts", 5));
  spec.quantum_restarts    = static_cast<std::size_t>(toml_get<std::int64_t>(root, "quantum_restarts", 3));
  spec.greedy_permutations = static_cast<std::size_t>(toml_get<std::int64_t>(root, "greedy_permutations", 100));
  spec.exact_max_contexts  = static_cast<std::size_t>(toml_get<std::int64_t>(root, "exact_max_contexts", 10));
  if (auto df = root["df"].value<double>())
  {
    spec.df = *df;
  }
  if (auto const *q = root["qhmm"].as_table())
  {
    spec.qhmm.steps = static_cast<std::size_t>(toml_get<std::int64_t>(*q, "steps", 2000));
    spec.qhmm.lr    = toml_get<double>(*q, "lr", 0.05);
  }
  if (auto const *bw = root["baum_welch"].as_table())
  {
    spec.baum_welch.max_iters = static_cast<std::size_t>(toml_get<std::int64_t>(*bw, "max_iters", 500));
    spec.baum_welch.tol       = toml_get<double>(*bw, "tol", 1e-7);
  }
  std::string out = toml_get<std::string>(root, "out", "");
  if (!out.empty())
  {
    out = (base / out).string();
  }

  if (!a.out.empty())
  {
    out = a.out;
  }
  if (a.seed)
  {
    spec.seed = *a.seed;
  }
  if (!a.dims.empty())
  {
    spec.dims = a.dims;
  }
  if (a.steps)
  {
    spec.qhmm.steps = *a.steps;
  }
  if (a.lr)
  {
    spec.qhmm.lr = *a.lr;
  }
  if (a.classical_restarts)
  {
    spec.classical_restarts = *a.classical_restarts;
  }
  if (a.quantum_restarts)
  {
    spec.quantum_restarts = *a.quantum_restarts;
  }
  if (a.df)
  {
    spec.df = *a.df;
  }
  spec.timings = a.timings || toml_get<bool>(root, "timings", false);
  spec.threads = a.threads;

  if (out.empty())
  {
    throw CLI::ValidationError("sweep needs --out or an out key in the config");
  }
  check_output_path(out);
  for (int d : spec.dims)
  {
    if (d < 1)
    {
      throw CLI::ValidationError("dims must be positive");
    }
  }
  if (spec.dims.empty())
  {
    throw CLI::ValidationError("sweep needs --dims or a dims key in the config");
  }

  spec.models       = sweep_models(root, base);
  auto const records = gap_sweep(spec);
  write_file_atomically(out, gap_records_csv(records));
  std::size_t failed = 0;
  for (auto const &r : records)
  {
    if (!r.error.empty())
    {
      ++failed;
    }
  }
  return json{{"out", out}, {"rows", records.size()}, {"failed_cells", failed}};
}

// ------------------------------------------------------------------ lr-test

struct LrArgs
{
  double ll_classical = 0.0;
  double ll_quantum   = 0.0;
  double tokens       = 0.0;
  double df           = 1.0;
};

void add_lr(CLI::App &app, LrArgs &a)
{
  auto *cmd = app.add_subcommand("lr-test", "Chi-squared likelihood-ratio test of quantum over classical fit");
  cmd->add_option("--ll-classical", a.ll_classical, "Classical per-token log-likelihood")->required();
  cmd->add_option("--ll-quantum", a.ll_quantum, "Quantum per-token log-likelihood")->required();
  cmd->add_option("--tokens", a.tokens, "Dataset token count N")->required()->check(CLI::PositiveNumber);
  cmd->add_option("--df", a.df, "Degrees of freedom")->check(CLI::Range(1.0, std::numeric_limits<double>::max()));
}

json run_lr(LrArgs const &a)
{
  auto const r = likelihood_ratio_test(a.ll_classical, a.ll_quantum, a.tokens, a.df);
  return json{{"statistic", r.statistic},
              {"df", r.df},
              {"p_value", r.p_value},
              {"reject_at_3sigma", r.reject_at_3sigma},
              {"scale", r.scale}};
}

}  // namespace

int run(std::vector<std::string> const &args, std::ostream &out, std::ostream &err)
{
  CLI::App app{"Contextuality estimators and classical/quantum sequence-model experiments", "kontext"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  GenerateArgs gen;
  IngestArgs   ing;
  EstimateArgs est;
  TrainArgs    trn;
  EvaluateArgs evl;
  SweepArgs    swp;
  LrArgs       lr;
  add_generate(app, gen);
  add_ingest(app, ing);
  add_estimate(app, est);
  add_train(app, trn);
  add_evaluate(app, evl);
  add_sweep(app, swp);
  add_lr(app, lr);

  std::vector<char const *> argv{"kontext"};
  for (auto const &a : args)
  {
    argv.push_back(a.c_str());
  }

  try
  {
    app.parse(static_cast<int>(argv.size()), argv.data());
    auto const *cmd  = app.get_subcommands().front();
    std::string name = cmd->get_name();
    if (name == "generate")
    {
      check_output_path(gen.out);
      emit(gen.out, model_to_json(generate_model(gen), gen.pretty ? 2 : -1), out);
    }
    else if (name == "ingest")
    {
      check_output_path(ing.out);
      auto const w = ingest_model(ing);
      emit(ing.out, model_to_json(w.model, ing.pretty ? 2 : -1), out);
      if (!ing.out.empty())
      {
        out << json{{"contexts", w.model.num_contexts()},
                    {"windows_scanned", w.windows_scanned},
                    {"windows_dropped", w.windows_dropped}}
                 .dump()
            << "\n";
      }
    }
    else if (name == "estimate")
    {
      out << run_estimate(est).dump() << "\n";
    }
    else if (name == "train")
    {
      out << run_train(trn).dump() << "\n";
    }
    else if (name == "evaluate")
    {
      out << run_evaluate(evl).dump() << "\n";
    }
    else if (name == "sweep")
    {
      out << run_sweep(swp).dump() << "\n";
    }
    else
    {
      out << run_lr(lr).dump() << "\n";
    }
    return 0;
  }
  catch (CLI::CallForHelp const &e)
  {
    app.exit(e, out, err);
    return 0;
  }
  catch (CLI::CallForAllHelp const &e)
  {
    app.exit(e, out, err);
    return 0;
  }
  catch (CLI::ParseError const &e)
  {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }
  catch (Error const &e)
  {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  catch (std::exception const &e)
  {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace kontext::cli
