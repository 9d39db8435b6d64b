#include "cvsei/manifest.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cvsei/binio.hpp"
#include "cvsei/errors.hpp"

namespace cvsei {

std::string digest_bytes(const std::string& bytes) {
    return binio::hex64(binio::fnv1a64(bytes.data(), bytes.size()));
}

std::string digest_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), Errc::corrupt_file, "cannot open for digest: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return digest_bytes(ss.str());
}

void RunManifest::add_output(const std::string& path) {
    outputs.emplace_back(path, digest_file(path));
}

void RunManifest::add_timing(const std::string& label, double ms) {
    timings_ms.emplace_back(label, ms);
}

void RunManifest::add_note(const std::string& key, const std::string& value) {
    notes.emplace_back(key, value);
}

void write_manifest(const RunManifest& m, const std::string& path) {
    nlohmann::ordered_json j;
    j["tool_version"] = kToolVersion;
    j["command"] = m.command;
    j["config_digest"] = m.config_digest;
    j["seed"] = m.seed;
    auto outs = nlohmann::ordered_json::array();
    for (const auto& [p, d] : m.outputs) outs.push_back({{"path", p}, {"digest", d}});
    j["outputs"] = outs;
    auto times = nlohmann::ordered_json::object();
    for (const auto& [label, ms] : m.timings_ms) times[label] = ms;
    j["timings_ms"] = times;
    if (!m.notes.empty()) {
        auto notes = nlohmann::ordered_json::object();
        for (const auto& [k, v] : m.notes) notes[k] = v;
        j["notes"] = notes;
    }
    std::ofstream os(path);
    require(os.good(), Errc::corrupt_file, "cannot write manifest: " + path);
    os << j.dump(2) << "\n";
}

Stopwatch::Stopwatch()
    : start_ns_(static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::nanoseconds>(
              std::chrono::steady_clock::now().time_since_epoch())
              .count())) {}

double Stopwatch::elapsed_ms() const {
    const auto now = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
    return static_cast<double>(now - start_ns_) / 1e6;
}

}  // namespace cvsei
