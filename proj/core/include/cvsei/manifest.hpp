#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cvsei {

inline constexpr const char* kToolVersion = "1.0.0";

// Reproducibility record written next to every subcommand's outputs. Content
// digests are FNV-1a64 of the file bytes; timings are informational only and
// never digested.
struct RunManifest {
    std::string command;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> outputs;   // path, digest
    std::vector<std::pair<std::string, double>> timings_ms;
    std::vector<std::pair<std::string, std::string>> notes;

    void add_output(const std::string& path);
    void add_timing(const std::string& label, double ms);
    void add_note(const std::string& key, const std::string& value);
};

std::string digest_bytes(const std::string& bytes);
std::string digest_file(const std::string& path);

void write_manifest(const RunManifest& m, const std::string& path);

// Wall-clock helper for manifest timings.
class Stopwatch {
public:
    Stopwatch();
    double elapsed_ms() const;

private:
    std::uint64_t start_ns_;
};

}  // namespace cvsei
