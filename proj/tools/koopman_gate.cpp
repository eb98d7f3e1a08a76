// koopman-gate: batch front end for the boundedness-obstruction certifier.
//
//   koopman-gate run JOB.json        one job, one report
//   koopman-gate batch JOBS.ndjson   one job per line, one report per line
//   koopman-gate validate REPORT     schema check of a report
//   koopman-gate replay REPORT       re-run the embedded config and compare

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include "koopman_gate/cli/run.hpp"

namespace {

using kgate::cli::json;

bool read_all(const std::string& path, std::string& text) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    text = ss.str();
    return true;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  text = ss.str();
  return true;
}

// Everything or nothing: the file is only touched once the content is final.
bool emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
    std::cout.flush();
    return true;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out << content;
  return static_cast<bool>(out);
}

int fail(int code, const std::string& msg) {
  std::cerr << kgate::cli::error_object(code, msg).dump() << "\n";
  return code;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"koopman-gate: certify unboundedness of composition operators from periodic-point evidence"};
  app.require_subcommand(1);

  std::string out_path, profile;
  std::uint64_t seed = 0;
  int r_max = 0, n_max = 0, jobs = 1;

  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--out", out_path, "Write the report here instead of stdout");
    sub->add_option("--seed", seed, "RNG seed for the saddle search");
    sub->add_option("--r-max", r_max, "Highest period searched")->check(CLI::Range(1, 12));
    sub->add_option("--n-max", n_max, "Highest jet order probed")->check(CLI::Range(1, 16));
    sub->add_option("--tolerance-profile", profile, "Tolerance profile")->check(CLI::IsMember({"default", "strict"}));
  };

  std::string job_path;
  auto* run = app.add_subcommand("run", "Run one job file ('-' for stdin)");
  run->add_option("job", job_path, "Job JSON")->required();
  add_overrides(run);

  std::string batch_path;
  auto* batch = app.add_subcommand("batch", "Run newline-delimited jobs ('-' for stdin)");
  batch->add_option("jobs_file", batch_path, "One job object per line")->required();
  batch->add_option("--jobs", jobs, "Jobs run in parallel")->check(CLI::Range(1, 256));
  add_overrides(batch);

  std::string report_path;
  auto* validate = app.add_subcommand("validate", "Check a report against schema v1");
  validate->add_option("report", report_path, "Report JSON")->required();

  auto* replay = app.add_subcommand("replay", "Re-run a report's embedded config and compare");
  replay->add_option("report", report_path, "Report JSON")->required();
  replay->add_option("--out", out_path, "Write the comparison here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), kgate::cli::kExitConfig);
  }

  kgate::cli::Overrides ov;
  auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  CLI::App* active = run->parsed() ? run : batch;
  if (given(active, "--seed")) ov.seed = seed;
  if (given(active, "--r-max")) ov.r_max = r_max;
  if (given(active, "--n-max")) ov.n_max = n_max;
  if (given(active, "--tolerance-profile")) ov.tolerance_profile = profile;

  if (run->parsed()) {
    std::string text;
    if (!read_all(job_path, text)) return fail(kgate::cli::kExitConfig, "cannot read job file " + job_path);
    auto res = kgate::cli::run_text(text, ov);
    if (res.exit_code != kgate::cli::kExitOk) {
      std::cerr << res.report.dump() << "\n";
      return res.exit_code;
    }
    if (!emit(out_path, res.report.dump(2) + "\n")) return fail(kgate::cli::kExitConfig, "cannot write " + out_path);
    return 0;
  }

  if (batch->parsed()) {
    std::string text;
    if (!read_all(batch_path, text)) return fail(kgate::cli::kExitConfig, "cannot read batch file " + batch_path);
    std::vector<std::string> lines;
    std::istringstream ss(text);
    for (std::string line; std::getline(ss, line);) lines.push_back(line);
    auto results = kgate::cli::run_batch(lines, ov, jobs);
    std::string content;
    for (const auto& r : results) content += r.report.dump() + "\n";
    if (!emit(out_path, content)) return fail(kgate::cli::kExitConfig, "cannot write " + out_path);
    return 0;
  }

  std::string text;
  if (!read_all(report_path, text)) return fail(kgate::cli::kExitConfig, "cannot read report " + report_path);
  json report;
  try {
    report = json::parse(text);
  } catch (const json::parse_error& e) {
    return fail(kgate::cli::kExitConfig, std::string("malformed JSON: ") + e.what());
  }
  if (validate->parsed()) {
    auto problems = kgate::cli::validate_report(report);
    json out = {{"schema", kgate::cli::kSchema}, {"kind", "validation"}, {"valid", problems.empty()}, {"problems", problems}};
    std::cout << out.dump(2) << "\n";
    return problems.empty() ? 0 : kgate::cli::kExitConfig;
  }
  json cmp = kgate::cli::replay(report);
  if (!emit(out_path, cmp.dump(2) + "\n")) return fail(kgate::cli::kExitConfig, "cannot write " + out_path);
  return cmp["matches"].get<bool>() ? 0 : kgate::cli::kExitNumerical;
}
