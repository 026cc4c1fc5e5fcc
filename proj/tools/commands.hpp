#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace ardiff::cli {

struct Context {
  std::filesystem::path out;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::string> outputs;

  // Path of an output file under the run directory; records it in the manifest.
  std::filesystem::path file(const std::string& name);
};

struct Command {
  CLI::App* app = nullptr;
  std::function<void(Context&)> run;
};

std::vector<Command> register_commands(CLI::App& app);

}  // namespace ardiff::cli
