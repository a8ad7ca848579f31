#include "miaudit/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "miaudit/c2st.hpp"
#include "miaudit/data_model.hpp"
#include "miaudit/divergence.hpp"
#include "miaudit/error.hpp"
#include "miaudit/mia.hpp"
#include "miaudit/projection.hpp"
#include "miaudit/synth.hpp"

namespace miaudit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kSeedEnv = "MIAUDIT_SEED";

std::uint64_t default_seed() {
  if (const char* env = std::getenv(kSeedEnv)) {
    std::uint64_t v = 0;
    const std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size()) return v;
  }
  return 42;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::vector<double> parse_alphas(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) {
    double a = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), a);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !(a > 0.0) || !std::isfinite(a)) {
      throw Error(ErrorKind::kConfig, "bad alpha '" + tok + "'");
    }
    out.push_back(a);
  }
  if (out.empty()) throw Error(ErrorKind::kConfig, "no alphas given");
  std::ranges::sort(out);
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw Error(ErrorKind::kConfig, "repeated alpha");
  }
  return out;
}

// Report header shared by every command. The timestamp stays in a single
// field so comparisons can mask it.
ordered_json report_header(std::string_view command) {
  ordered_json j;
  j["tool"] = std::string(kToolName);
  j["version"] = std::string(kToolVersion);
  j["command"] = std::string(command);
  j["generated_at"] = utc_timestamp();
  return j;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path);
  f << text;
  if (!f) throw Error(ErrorKind::kIo, "write failed for " + path);
}

// Progress reporter printing roughly every 10% to the error stream.
std::function<void(std::size_t, std::size_t)> progress_printer(std::ostream& err,
                                                               std::string label, bool quiet) {
  if (quiet) return {};
  return [&err, label = std::move(label)](std::size_t done, std::size_t total) {
    const std::size_t step = std::max<std::size_t>(1, total / 10);
    if (done % step == 0 || done == total) {
      err << label << ": " << done << "/" << total << "\n";
    }
  };
}

struct EmbeddingInput {
  std::string input;
  std::string format = "auto";
  std::string members;
  std::string nonmembers;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--input,-i", input, "Labeled embedding file (emb1 or csv)");
    cmd->add_option("--format", format, "Input format: auto|emb1|csv")
        ->check(CLI::IsMember({"auto", "emb1", "csv"}));
    cmd->add_option("--members", members, "Member embedding file (two-file mode)");
    cmd->add_option("--nonmembers", nonmembers, "Nonmember embedding file (two-file mode)");
  }

  EmbeddingSet load() const {
    const bool single = !input.empty();
    const bool pair = !members.empty() || !nonmembers.empty();
    if (single == pair || (pair && (members.empty() || nonmembers.empty()))) {
      throw Error(ErrorKind::kConfig,
                  "give either --input FILE or both --members FILE and --nonmembers FILE");
    }
    if (pair) return read_embedding_pair(members, nonmembers);
    const EmbeddingFormat fmt = format == "auto"  ? embedding_format_from_path(input)
                                : format == "csv" ? EmbeddingFormat::kCsv
                                                  : EmbeddingFormat::kEmb1;
    return read_embeddings(input, fmt);
  }

  void echo(ordered_json& config) const {
    if (!input.empty()) {
      config["input"] = input;
      config["format"] = format;
    } else {
      config["members"] = members;
      config["nonmembers"] = nonmembers;
    }
  }
};

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

struct AuditConfig {
  EmbeddingInput in;
  std::size_t folds = 5;
  std::size_t perms = 1000;
  std::uint64_t seed = 42;
  bool no_l2norm = false;
  double c = 1.0;
  bool fast_perm = false;
  std::string mmd_estimator = "unbiased";
  std::string bandwidth = "median";
  std::size_t threads = 1;
  std::string output = "-";
  bool quiet = false;
};

int cmd_audit(const AuditConfig& cfg, std::ostream& out, std::ostream& err) {
  const EmbeddingSet raw = cfg.in.load();
  raw.require_both_classes(cfg.folds);
  const bool l2norm = !cfg.no_l2norm;
  const EmbeddingSet e = l2norm ? raw.l2_normalized() : raw;

  C2stOptions copts;
  copts.folds = cfg.folds;
  copts.c = cfg.c;
  copts.perms = cfg.perms;
  copts.seed = cfg.seed;
  copts.l2norm = l2norm;
  copts.mode = cfg.fast_perm ? C2stPermutationMode::kFixedScores
                             : C2stPermutationMode::kFullPipeline;
  copts.threads = cfg.threads;
  copts.progress = progress_printer(err, "c2st permutations", cfg.quiet);
  // c2st normalizes internally; hand it the raw vectors.
  const C2stResult c2 = c2st(raw, copts);
  if (c2.nonconverged_fits > 0 && !cfg.quiet) {
    err << "warning: " << c2.nonconverged_fits
        << " logistic-regression fit(s) did not converge\n";
  }

  MmdOptions mopts;
  mopts.perms = cfg.perms;
  mopts.seed = cfg.seed;
  mopts.estimator = parse_estimator(cfg.mmd_estimator);
  mopts.bandwidth = parse_bandwidth(cfg.bandwidth);
  mopts.threads = cfg.threads;
  mopts.progress = progress_printer(err, "mmd permutations", cfg.quiet);
  const MmdResult mmd = mmd_test(e, mopts);

  const FidResult f = fid(e);

  ordered_json report = report_header("audit");
  ordered_json config;
  cfg.in.echo(config);
  config["folds"] = cfg.folds;
  config["perms"] = cfg.perms;
  config["seed"] = cfg.seed;
  config["l2norm"] = l2norm;
  config["c"] = cfg.c;
  config["permutation_mode"] = cfg.fast_perm ? "fixed-scores" : "full-pipeline";
  config["mmd_estimator"] = cfg.mmd_estimator;
  config["bandwidth_rule"] = cfg.bandwidth;
  config["clamp_tol"] = kDefaultClampTol;
  report["config"] = config;
  report["data"] = {{"n_members", e.count(kMember)},
                    {"n_nonmembers", e.count(kNonMember)},
                    {"dim", e.dim()}};
  report["c2st_auroc"] = c2.auroc;
  report["c2st_pauroc05"] = c2.pauroc05;
  report["c2st_pauroc05_raw"] = c2.pauroc05_raw;
  report["c2st_tpr_at_05fpr"] = c2.tpr05;
  report["c2st_pvalue"] = c2.pvalue;
  report["c2st_nonconverged_fits"] = c2.nonconverged_fits;
  report["mmd2"] = mmd.mmd2;
  report["mmd"] = std::sqrt(std::max(mmd.mmd2, 0.0));
  report["mmd_pvalue"] = mmd.pvalue;
  report["mmd_gamma"] = mmd.gamma;
  report["mmd_median_distance"] = mmd.median_distance;
  report["mmd_estimator"] = std::string(to_string(mmd.estimator));
  report["fid"] = f.reported();
  report["fid_raw"] = f.fid;
  report["fid_mean_term"] = f.mean_term;
  report["fid_trace_term"] = f.trace_term;
  write_text(cfg.output, report.dump(2) + "\n", out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

struct AttackConfig {
  std::string input;
  std::string methods;
  std::string slices;
  std::string output = "-";
  std::string csv;
  std::size_t threads = 1;
};

std::string grid_csv(const AttackGrid& grid) {
  std::ostringstream os;
  os << "metric,method";
  for (SliceId s : grid.slices) os << ',' << to_string(s);
  os << '\n';
  for (const char* metric : {"auroc", "tpr_at_05fpr"}) {
    const bool is_auroc = std::string_view(metric) == "auroc";
    for (std::size_t m = 0; m < grid.methods.size(); ++m) {
      os << metric << ',' << to_string(grid.methods[m]);
      for (std::size_t s = 0; s < grid.slices.size(); ++s) {
        const GridCell& c = grid.at(m, s);
        os << ',';
        if (!c.applicable) {
          os << '-';
        } else {
          os << format_double(is_auroc ? c.auroc : c.tpr05);
        }
      }
      os << '\n';
    }
  }
  return os.str();
}

int cmd_attack(const AttackConfig& cfg, std::ostream& out, std::ostream&) {
  if (cfg.input.empty()) throw Error(ErrorKind::kConfig, "--input is required");
  std::vector<MethodDescriptor> methods;
  if (cfg.methods.empty()) {
    methods = default_methods();
  } else {
    for (const auto& m : split_list(cfg.methods)) methods.push_back(parse_method(m));
  }
  std::vector<SliceId> slices;
  if (cfg.slices.empty()) {
    slices.assign(kAllSlices.begin(), kAllSlices.end());
  } else {
    for (const auto& s : split_list(cfg.slices)) slices.push_back(parse_slice(s));
  }
  const TokenRecordSet records = read_token_records(fs::path(cfg.input));
  const AttackGrid grid = evaluate_grid(records, methods, slices, cfg.threads);

  ordered_json report = report_header("attack");
  ordered_json config;
  config["input"] = cfg.input;
  config["methods"] = ordered_json::array();
  for (const auto& m : methods) config["methods"].push_back(to_string(m));
  config["slices"] = ordered_json::array();
  for (SliceId s : slices) config["slices"].push_back(std::string(to_string(s)));
  config["fpr_cap"] = 0.05;
  report["config"] = config;
  std::size_t n1 = 0;
  for (const auto& s : records.samples) n1 += s.label == 1;
  report["data"] = {{"n_members", n1},
                    {"n_nonmembers", records.samples.size() - n1},
                    {"alphas", records.alphas}};
  ordered_json cells = ordered_json::array();
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (std::size_t s = 0; s < slices.size(); ++s) {
      const GridCell& c = grid.at(m, s);
      ordered_json cell;
      cell["method"] = to_string(methods[m]);
      cell["display"] = display_name(methods[m]);
      cell["slice"] = std::string(to_string(slices[s]));
      cell["applicable"] = c.applicable;
      cell["auroc"] = c.applicable ? ordered_json(c.auroc) : ordered_json(nullptr);
      cell["tpr_at_05fpr"] = c.applicable ? ordered_json(c.tpr05) : ordered_json(nullptr);
      cells.push_back(std::move(cell));
    }
  }
  report["cells"] = std::move(cells);
  write_text(cfg.output, report.dump(2) + "\n", out);
  if (!cfg.csv.empty()) write_text(cfg.csv, grid_csv(grid), out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

struct ProjectConfig {
  EmbeddingInput in;
  double shrinkage = kDefaultShrinkage;
  bool no_l2norm = false;
  std::string output;
  std::string out_format = "auto";
  std::string basis;
};

int cmd_project(const ProjectConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.output.empty()) throw Error(ErrorKind::kConfig, "--output is required");
  const EmbeddingSet raw = cfg.in.load();
  raw.require_both_classes(2);
  const bool l2norm = !cfg.no_l2norm;
  const EmbeddingSet e = l2norm ? raw.l2_normalized() : raw;
  const ProjectionBasis basis = build_projection_basis(e, cfg.shrinkage);
  if (basis.warning) err << "warning: " << *basis.warning << "\n";
  const auto points = project(e, basis);

  const bool as_json = cfg.out_format == "json" ||
                       (cfg.out_format == "auto" && fs::path(cfg.output).extension() == ".json");
  std::string text;
  if (as_json) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : points) {
      arr.push_back(ordered_json{{"id", p.id},
                                 {"label", p.label},
                                 {"dim1", p.dim1},
                                 {"dim2", p.dim2},
                                 {"dim3", p.dim3}});
    }
    text = arr.dump(2) + "\n";
  } else {
    std::ostringstream os;
    os << "id,label,dim1,dim2,dim3\n";
    for (const auto& p : points) {
      os << p.id << ',' << p.label << ',' << format_double(p.dim1) << ','
         << format_double(p.dim2) << ',' << format_double(p.dim3) << '\n';
    }
    text = os.str();
  }
  write_text(cfg.output, text, out);

  const std::string sidecar =
      !cfg.basis.empty() ? cfg.basis : (cfg.output == "-" ? "" : cfg.output + ".basis.json");
  if (!sidecar.empty()) {
    ordered_json j = report_header("project");
    ordered_json config;
    cfg.in.echo(config);
    config["shrinkage"] = cfg.shrinkage;
    config["l2norm"] = l2norm;
    config["centering"] = "global";
    j["config"] = config;
    j["n_samples"] = points.size();
    j["dim"] = e.dim();
    j["mean"] = basis.mean;
    j["dim1"] = basis.dim1;
    j["dim2"] = basis.dim2;
    j["dim3"] = basis.dim3;
    j["explained_variance"] = basis.explained_variance;
    j["warning"] = basis.warning ? ordered_json(*basis.warning) : ordered_json(nullptr);
    write_text(sidecar, j.dump(2) + "\n", out);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// summarize
// ---------------------------------------------------------------------------

struct SummarizeConfig {
  std::string input;
  std::string alphas = "0.5,1.0";
  std::string output = "-";
};

// Full-distribution input, one sample per line:
//   {"id": .., "label": 0|1, "regions": {"img": [{"logprobs": [..],
//    "realized": int|null}, ..], ..}}
TokenRecordSet summarize_full_records(std::istream& in, std::span<const double> alphas) {
  TokenRecordSet records;
  records.alphas.assign(alphas.begin(), alphas.end());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::kFormat, where + ": " + ex.what(), FormatCode::kBadJson);
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("label") || !obj["label"].is_number_integer() ||
        !obj.contains("regions") || !obj["regions"].is_object()) {
      throw Error(ErrorKind::kFormat, where + ": expected {id, label, regions}",
                  FormatCode::kBadJson);
    }
    TokenSample sample;
    sample.id = obj["id"].get<std::string>();
    sample.label = obj["label"].get<int>();
    for (const auto& [name, tokens] : obj["regions"].items()) {
      const auto region = parse_region(name);
      if (!region) {
        throw Error(ErrorKind::kFormat, where + ": unknown region '" + name + "'",
                    FormatCode::kUnknownRegion);
      }
      if (!tokens.is_array()) {
        throw Error(ErrorKind::kFormat, where + ": region '" + name + "' is not an array",
                    FormatCode::kBadJson);
      }
      TokenList list;
      for (const auto& tok : tokens) {
        if (!tok.is_object() || !tok.contains("logprobs") || !tok["logprobs"].is_array()) {
          throw Error(ErrorKind::kFormat, where + ": token without 'logprobs' array",
                      FormatCode::kBadJson);
        }
        std::vector<double> lp;
        lp.reserve(tok["logprobs"].size());
        for (const auto& v : tok["logprobs"]) {
          if (!v.is_number()) {
            throw Error(ErrorKind::kFormat, where + ": non-numeric log-probability",
                        FormatCode::kBadNumber);
          }
          lp.push_back(v.get<double>());
        }
        std::optional<std::size_t> realized;
        if (tok.contains("realized") && !tok["realized"].is_null()) {
          if (!tok["realized"].is_number_integer() || tok["realized"].get<long long>() < 0) {
            throw Error(ErrorKind::kIndex, where + ": 'realized' must be a non-negative integer");
          }
          realized = tok["realized"].get<std::size_t>();
        }
        try {
          list.push_back(summarize_distribution(lp, realized, alphas));
        } catch (const Error& ex) {
          throw Error(ex.kind(), where + " (sample '" + sample.id + "'): " + ex.what(),
                      ex.code());
        }
      }
      sample.region(*region) = std::move(list);
    }
    records.samples.push_back(std::move(sample));
  }
  records.validate();
  return records;
}

int cmd_summarize(const SummarizeConfig& cfg, std::ostream& out, std::ostream&) {
  if (cfg.input.empty()) throw Error(ErrorKind::kConfig, "--input is required");
  const auto alphas = parse_alphas(cfg.alphas);
  std::ifstream in(cfg.input);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + cfg.input);
  const TokenRecordSet records = summarize_full_records(in, alphas);
  std::ostringstream os;
  write_token_records(os, records);
  write_text(cfg.output, os.str(), out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthGaussianConfig {
  std::size_t n = 500;
  std::size_t d = 8;
  double shift = 0.0;
  double offset = 0.0;
  double sigma = 1.0;
  std::uint64_t seed = 42;
  std::string output;
  std::string format = "auto";
};

int cmd_synth_gaussian(const SynthGaussianConfig& cfg, std::ostream&, std::ostream&) {
  if (cfg.output.empty()) throw Error(ErrorKind::kConfig, "--output is required");
  if (cfg.d == 0) throw Error(ErrorKind::kConfig, "--d must be >= 1");
  if (cfg.n < 1) throw Error(ErrorKind::kConfig, "--n must be >= 1");
  if (!(cfg.sigma > 0.0)) throw Error(ErrorKind::kConfig, "--sigma must be > 0");
  // Both classes share the offset on the last coordinate; class 1 is shifted
  // along the first coordinate.
  Vector mu0(cfg.d, 0.0);
  mu0[cfg.d - 1] += cfg.offset;
  Vector mu1 = mu0;
  mu1[0] += cfg.shift;
  const double var = cfg.sigma * cfg.sigma;
  const EmbeddingSet e = gen_gaussian_pair(GaussianSpec::isotropic(mu0, var, cfg.n),
                                           GaussianSpec::isotropic(mu1, var, cfg.n), cfg.seed);
  const EmbeddingFormat fmt = cfg.format == "auto" ? embedding_format_from_path(cfg.output)
                              : cfg.format == "csv" ? EmbeddingFormat::kCsv
                                                    : EmbeddingFormat::kEmb1;
  write_embeddings(cfg.output, e, fmt);
  return kExitOk;
}

struct SynthTokensConfig {
  std::size_t n = 1000;
  std::size_t img_len = 16;
  std::size_t inst_len = 16;
  std::size_t desp_len = 32;
  double shift = 0.0;
  std::uint64_t seed = 42;
  std::string alphas = "0.5,1.0";
  std::size_t vocab = 16;
  std::string output;
};

int cmd_synth_tokens(const SynthTokensConfig& cfg, std::ostream& out, std::ostream&) {
  if (cfg.output.empty()) throw Error(ErrorKind::kConfig, "--output is required");
  if (cfg.n < 1) throw Error(ErrorKind::kConfig, "--n must be >= 1");
  TokenSynthOptions opts;
  opts.n_per_class = cfg.n;
  opts.img_len = cfg.img_len;
  opts.inst_len = cfg.inst_len;
  opts.desp_len = cfg.desp_len;
  opts.member_shift = cfg.shift;
  opts.seed = cfg.seed;
  opts.alphas = parse_alphas(cfg.alphas);
  opts.vocab = cfg.vocab;
  const TokenRecordSet records = gen_token_records(opts);
  std::ostringstream os;
  write_token_records(os, records);
  write_text(cfg.output, os.str(), out);
  return kExitOk;
}

}  // namespace

std::string mask_timestamp(std::string_view report) {
  std::string out;
  std::size_t pos = 0;
  while (pos < report.size()) {
    std::size_t end = report.find('\n', pos);
    if (end == std::string_view::npos) end = report.size();
    const std::string_view line = report.substr(pos, end - pos);
    if (line.find("\"generated_at\"") == std::string_view::npos) {
      out.append(line);
      if (end < report.size()) out.push_back('\n');
    }
    pos = end + 1;
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Membership-inference benchmark auditing and attack evaluation",
               std::string(kToolName)};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  const std::uint64_t seed = default_seed();

  AuditConfig audit;
  audit.seed = seed;
  auto* audit_cmd = app.add_subcommand("audit", "Distribution audit: C2ST, MMD and FID");
  audit.in.add_options(audit_cmd);
  audit_cmd->add_option("--folds", audit.folds, "Cross-validation folds")->capture_default_str();
  audit_cmd->add_option("--perms", audit.perms, "Permutations per test")->capture_default_str();
  audit_cmd->add_option("--seed", audit.seed, "Master seed (env MIAUDIT_SEED)")
      ->capture_default_str();
  audit_cmd->add_flag("--no-l2norm", audit.no_l2norm, "Skip per-vector L2 normalization");
  audit_cmd->add_option("--c", audit.c, "Inverse L2 regularization strength")
      ->capture_default_str();
  audit_cmd->add_flag("--fast-perm", audit.fast_perm,
                      "Permute labels against fixed OOF scores instead of refitting");
  audit_cmd->add_option("--mmd-estimator", audit.mmd_estimator, "unbiased|biased")
      ->check(CLI::IsMember({"unbiased", "biased"}));
  audit_cmd->add_option("--bandwidth", audit.bandwidth, "median|median-sq")
      ->check(CLI::IsMember({"median", "median-sq"}));
  audit_cmd->add_option("--threads", audit.threads, "Worker threads")->check(CLI::Range(1, 1024));
  audit_cmd->add_option("--output,-o", audit.output, "Report path ('-' for stdout)");
  audit_cmd->add_flag("--quiet,-q", audit.quiet, "No progress output");

  AttackConfig attack;
  auto* attack_cmd = app.add_subcommand("attack", "Evaluate attack scores over region slices");
  attack_cmd->add_option("--input,-i", attack.input, "Token summary JSONL")->required();
  attack_cmd->add_option("--methods", attack.methods,
                         "Comma-separated methods: ppl, mink:K, renyi:aA:kK");
  attack_cmd->add_option("--slices", attack.slices, "Comma-separated: img,inst,desp,inst+desp");
  attack_cmd->add_option("--output,-o", attack.output, "Grid JSON path ('-' for stdout)");
  attack_cmd->add_option("--csv", attack.csv, "Also write a table-shaped CSV");
  attack_cmd->add_option("--threads", attack.threads, "Worker threads")->check(CLI::Range(1, 1024));

  ProjectConfig proj;
  auto* project_cmd = app.add_subcommand("project", "Fisher axis + residual PCA coordinates");
  proj.in.add_options(project_cmd);
  project_cmd->add_option("--shrinkage", proj.shrinkage, "Relative ridge on S_w")
      ->capture_default_str();
  project_cmd->add_flag("--no-l2norm", proj.no_l2norm, "Skip per-vector L2 normalization");
  project_cmd->add_option("--output,-o", proj.output, "Coordinate file (csv or json)")->required();
  project_cmd->add_option("--output-format", proj.out_format, "auto|csv|json")
      ->check(CLI::IsMember({"auto", "csv", "json"}));
  project_cmd->add_option("--basis", proj.basis, "Basis sidecar path (default OUTPUT.basis.json)");

  SummarizeConfig summ;
  auto* summarize_cmd =
      app.add_subcommand("summarize", "Convert full distributions to token summaries");
  summarize_cmd->add_option("--input,-i", summ.input, "Full-distribution JSONL")->required();
  summarize_cmd->add_option("--alphas", summ.alphas, "Comma-separated Rényi orders")
      ->capture_default_str();
  summarize_cmd->add_option("--output,-o", summ.output, "Summary JSONL ('-' for stdout)");

  auto* synth_cmd = app.add_subcommand("synth", "Generate seeded synthetic fixtures");
  synth_cmd->require_subcommand(1);
  SynthGaussianConfig sg;
  sg.seed = seed;
  auto* sg_cmd = synth_cmd->add_subcommand("gaussian", "Two Gaussian embedding clouds");
  sg_cmd->add_option("--n", sg.n, "Samples per class")->capture_default_str();
  sg_cmd->add_option("--d", sg.d, "Dimension")->capture_default_str();
  sg_cmd->add_option("--shift", sg.shift, "Member mean shift along the first axis")
      ->capture_default_str();
  sg_cmd->add_option("--offset", sg.offset, "Common offset on the last axis")
      ->capture_default_str();
  sg_cmd->add_option("--sigma", sg.sigma, "Per-axis standard deviation")->capture_default_str();
  sg_cmd->add_option("--seed", sg.seed, "Seed")->capture_default_str();
  sg_cmd->add_option("--output,-o", sg.output, "Output file (.emb1 or .csv)")->required();
  sg_cmd->add_option("--format", sg.format, "auto|emb1|csv")
      ->check(CLI::IsMember({"auto", "emb1", "csv"}));
  SynthTokensConfig st;
  st.seed = seed;
  auto* st_cmd = synth_cmd->add_subcommand("tokens", "Synthetic token-summary records");
  st_cmd->add_option("--n", st.n, "Samples per class")->capture_default_str();
  st_cmd->add_option("--img-len", st.img_len, "Tokens in the img region")->capture_default_str();
  st_cmd->add_option("--inst-len", st.inst_len, "Tokens in the inst region")->capture_default_str();
  st_cmd->add_option("--desp-len", st.desp_len, "Tokens in the desp region")->capture_default_str();
  st_cmd->add_option("--shift", st.shift, "Nats added to member logp")->capture_default_str();
  st_cmd->add_option("--seed", st.seed, "Seed")->capture_default_str();
  st_cmd->add_option("--alphas", st.alphas, "Comma-separated Rényi orders")->capture_default_str();
  st_cmd->add_option("--vocab", st.vocab, "Vocabulary size of the entropy distributions")
      ->capture_default_str();
  st_cmd->add_option("--output,-o", st.output, "Output JSONL")->required();

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back(kToolName);
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (dynamic_cast<const CLI::CallForVersion*>(&e) ? std::string(kToolVersion) + "\n"
                                                             : app.help());
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  try {
    if (audit_cmd->parsed()) return cmd_audit(audit, out, err);
    if (attack_cmd->parsed()) return cmd_attack(attack, out, err);
    if (project_cmd->parsed()) return cmd_project(proj, out, err);
    if (summarize_cmd->parsed()) return cmd_summarize(summ, out, err);
    if (sg_cmd->parsed()) return cmd_synth_gaussian(sg, out, err);
    if (st_cmd->parsed()) return cmd_synth_tokens(st, out, err);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind());
    if (e.code() != FormatCode::kNone) err << "/" << to_string(e.code());
    err << "]: " << e.what() << "\n";
    return e.is_input_error() ? kExitInputError : kExitNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumericError;
  }
  return kExitInputError;
}

}  // namespace miaudit
