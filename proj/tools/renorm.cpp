// renorm: build, verify and inspect realization artifacts.
//
// exit codes: 0 ok, 1 usage, 2 bad config or artifact, 3 construction
// failure, 4 verification failure, 5 plot layout unavailable

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "renorm/pipeline.hpp"
#include "renorm/plot.hpp"

namespace fs = std::filesystem;
using renorm::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kBadInput = 2, kConstruction = 3, kVerification = 4, kLayout = 5 };

struct Failure {
  int code;
  std::string msg;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kBadInput, "cannot read " + path};
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Failure{kBadInput, path + ": " + e.what()};
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{kBadInput, "cannot write " + path.string()};
  out << text;
}

renorm::Config load_config(const std::string& path) {
  try {
    return renorm::config_from_json(read_json(path));
  } catch (const renorm::Error& e) {
    throw Failure{kBadInput, e.what()};
  }
}

int cmd_build(const std::string& config, const std::string& out) {
  auto c = load_config(config);
  json doc;
  try {
    doc = renorm::build_artifact(c);
  } catch (const renorm::Error& e) {
    throw Failure{kConstruction, e.what()};
  }
  write_text(out, doc.dump(1) + "\n");
  std::cerr << "wrote " << out << "\n";
  return kOk;
}

int cmd_verify(const std::string& artifact, const std::string& suite, const std::string& report_path) {
  json doc = read_json(artifact);
  json report;
  try {
    report = renorm::verify_artifact(doc, suite);
  } catch (const renorm::Error& e) {
    int code = e.kind() == renorm::ErrorKind::InvalidArgument ? kBadInput : kVerification;
    throw Failure{code, e.what()};
  } catch (const json::exception& e) {
    throw Failure{kBadInput, std::string("artifact: ") + e.what()};
  }
  for (const auto& ch : report["checks"]) {
    std::cout << (ch["pass"].get<bool>() ? "PASS " : "FAIL ") << ch["name"].get<std::string>() << "  value="
              << ch["value"].get<double>() << " bound=" << ch["bound"].get<double>();
    if (ch.contains("note") && !ch["pass"].get<bool>()) std::cout << "  (" << ch["note"].get<std::string>() << ")";
    std::cout << "\n";
  }
  if (!report_path.empty()) write_text(report_path, report.dump(1) + "\n");
  return report["pass"].get<bool>() ? kOk : kVerification;
}

int cmd_fragment(const std::string& config) {
  auto c = load_config(config);
  try {
    std::cout << renorm::fragment_report(c).dump(1) << "\n";
  } catch (const renorm::Error& e) {
    throw Failure{kConstruction, e.what()};
  }
  return kOk;
}

int cmd_plot(const std::string& artifact, const std::string& out_dir) {
  json doc = read_json(artifact);
  int d = doc.contains("config") ? doc["config"].value("d", 2) : 2;
  if (d != 2) throw Failure{kLayout, "tower layout is only drawn for d = 2 (artifact has d = " + std::to_string(d) + ")"};
  fs::path dir(out_dir);
  try {
    write_text(dir / "tower.svg", renorm::tower_svg(doc));
    json rows = renorm::scaling_rows(doc);
    write_text(dir / "scaling.csv", renorm::scaling_csv(rows));
    write_text(dir / "scaling.svg", renorm::scaling_svg(rows));
  } catch (const json::exception& e) {
    throw Failure{kBadInput, std::string("artifact: ") + e.what()};
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"renorm: realize diffeomorphisms as renormalized return maps"};
  app.require_subcommand(1);

  std::string config, out, artifact, suite = "all", report, out_dir;
  auto* build = app.add_subcommand("build", "build an artifact from a config");
  build->add_option("--config", config, "config JSON")->required();
  build->add_option("--out", out, "artifact path")->required();

  auto* verify = app.add_subcommand("verify", "re-check an artifact");
  verify->add_option("--artifact", artifact, "artifact path")->required();
  verify->add_option("--suite", suite, "all, tower, return-map, volume, norms or maps");
  verify->add_option("--report", report, "write the JSON report here");

  auto* frag = app.add_subcommand("fragment", "fragmentation constants for a config's target");
  frag->add_option("--config", config, "config JSON")->required();

  auto* plot = app.add_subcommand("plot", "tower layout and scaling plots");
  plot->add_option("--artifact", artifact, "artifact path")->required();
  plot->add_option("--out-dir", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*build) return cmd_build(config, out);
    if (*verify) return cmd_verify(artifact, suite, report);
    if (*frag) return cmd_fragment(config);
    if (*plot) return cmd_plot(artifact, out_dir);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.msg << "\n";
    return f.code;
  } catch (const renorm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConstruction;
  }
  return kUsage;
}
