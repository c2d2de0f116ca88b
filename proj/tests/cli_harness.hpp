#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pssmp/cli.hpp"

namespace harness {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

inline CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "pssmp");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliResult r;
    r.code = pssmp::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

inline std::string model(const std::string& name) { return std::string(PSSMP_MODELS_DIR) + "/" + name + ".json"; }

inline std::filesystem::path fresh_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("pssmp_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Every regular file under `dir`, keyed by name, in sorted order.
inline std::vector<std::pair<std::string, std::string>> dir_contents(const std::filesystem::path& dir) {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file()) files.emplace_back(e.path().filename().string(), slurp(e.path()));
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace harness
