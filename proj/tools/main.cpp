#include <algorithm>
#include <chrono>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ardiff/common.hpp"
#include "ardiff/io.hpp"
#include "commands.hpp"

namespace fs = std::filesystem;
using ardiff::io::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Options that name where outputs go rather than what is computed.
const std::set<std::string> kNotConfig{"out", "config", "threads", "help"};

std::string scalar_token(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Values from a --config file become ordinary arguments placed ahead of the
// user's own, so anything given explicitly still wins.
std::vector<std::string> config_tokens(const json& cfg) {
  std::vector<std::string> tokens;
  for (const auto& [key, value] : cfg.items()) {
    if (kNotConfig.count(key)) continue;
    if (value.is_array()) {
      if (value.empty()) continue;
      tokens.push_back("--" + key);
      for (const auto& v : value) tokens.push_back(scalar_token(v));
    } else {
      tokens.push_back("--" + key);
      tokens.push_back(scalar_token(value));
    }
  }
  return tokens;
}

json typed(const std::string& s) {
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used == s.size()) {
      if (s.find_first_of(".eE") == std::string::npos) return std::stoll(s);
      return d;
    }
  } catch (const std::exception&) {
  }
  return s;
}

// Effective option values of the subcommand (given or defaulted), plus the seed.
json resolved_config(CLI::App* sub, std::uint64_t seed) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (kNotConfig.count(name)) continue;
    std::vector<std::string> vals = opt->results();
    if (vals.empty()) {
      const std::string def = opt->get_default_str();
      if (def.empty()) continue;
      // vector defaults are captured as "[a,b,c]"
      if (def.front() == '[' && def.back() == ']') {
        std::string inner = def.substr(1, def.size() - 2);
        std::size_t start = 0;
        while (start <= inner.size() && !inner.empty()) {
          const auto comma = inner.find(',', start);
          vals.push_back(inner.substr(start, comma - start));
          if (comma == std::string::npos) break;
          start = comma + 1;
        }
      } else {
        vals.push_back(def);
      }
    }
    if (opt->get_expected_max() > 1) {
      json arr = json::array();
      for (const auto& v : vals) arr.push_back(typed(v));
      cfg[name] = arr;
    } else if (!vals.empty()) {
      cfg[name] = typed(vals.back());
    }
  }
  cfg["seed"] = seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ardiff: autoregressive diffusion numerical laboratory"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  ardiff::cli::Context ctx;
  std::string out = "out";
  std::string config_path;
  ctx.seed = 0;
  app.add_option("--seed", ctx.seed, "Root seed");
  app.add_option("--out", out, "Output directory");
  app.add_option("--config", config_path, "JSON config (a run.json manifest also works)");
  app.add_option("--threads", ctx.threads, "Worker threads")->check(CLI::PositiveNumber);

  auto commands = ardiff::cli::register_commands(app);
  for (auto& c : commands)
    c.app->option_defaults()->always_capture_default()->multi_option_policy(
        CLI::MultiOptionPolicy::TakeAll);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    // look for --config before the real parse
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string cfg_file;
      if (args[i] == "--config" && i + 1 < args.size()) cfg_file = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) cfg_file = args[i].substr(9);
      if (cfg_file.empty()) continue;
      const json doc = ardiff::io::read_json_file(cfg_file);
      const json cfg = doc.contains("config") ? doc.at("config") : doc;
      if (doc.contains("schema") && doc.at("schema") != ardiff::io::kSchema)
        throw ardiff::ValidationError("config schema must be " + std::string(ardiff::io::kSchema));
      json sub_cfg = cfg;
      std::vector<std::string> global;
      if (sub_cfg.contains("seed")) {
        global = {"--seed", scalar_token(sub_cfg.at("seed"))};
        sub_cfg.erase("seed");
      }
      const std::vector<std::string> extra = config_tokens(sub_cfg);
      // subcommand values go right after its name, the seed goes first
      std::size_t at = std::string::npos;
      for (std::size_t k = 0; k < args.size() && at == std::string::npos; ++k)
        for (const auto& c : commands)
          if (args[k] == c.app->get_name()) at = k + 1;
      if (at == std::string::npos) {
        if (!doc.contains("command")) throw ardiff::ValidationError("no subcommand given");
        args.push_back(doc.at("command").get<std::string>());
        at = args.size();
      }
      args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), extra.begin(), extra.end());
      args.insert(args.begin(), global.begin(), global.end());
      break;
    }
  } catch (const ardiff::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ctx.out = out;
      fs::create_directories(ctx.out);
      c.run(ctx);
    } catch (const ardiff::ValidationError& e) {
      std::cerr << "validation error: " << e.what() << '\n';
      return 2;
    } catch (const ardiff::NumericalError& e) {
      std::cerr << "numerical error: " << e.what() << '\n';
      return 3;
    } catch (const fs::filesystem_error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
    ardiff::io::RunManifest m;
    m.command = c.app->get_name();
    m.config = resolved_config(c.app, ctx.seed);
    m.seed = ctx.seed;
    m.version = kVersion;
    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.outputs = ctx.outputs;
    ardiff::io::write_json_file(ctx.out / "run.json", m.to_json());
    return 0;
  }
  return 2;
}
