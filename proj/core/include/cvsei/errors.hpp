#pragma once

#include <stdexcept>
#include <string>

namespace cvsei {

// Failure classes surfaced by the library. The CLI maps these onto exit
// codes: data/file/config problems -> 2, numeric failures -> 3.
enum class Errc {
    payload_length,
    sample_rate_too_low,
    corrupt_file,
    shape_mismatch,
    degenerate_batch,
    missing_cache,
    label_out_of_range,
    insufficient_class_data,
    no_valid_triplet,
    non_finite_loss,
    config_mismatch,
    insufficient_data,
    length_mismatch,
    singleton_class,
    too_few_classes,
    degenerate_data,
    invalid_config,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    Errc code() const noexcept { return code_; }

    // True for failures produced by numeric breakdown rather than bad inputs.
    bool numeric() const noexcept {
        return code_ == Errc::non_finite_loss || code_ == Errc::degenerate_data;
    }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) {
    throw Error(code, msg);
}

inline void require(bool cond, Errc code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

}  // namespace cvsei
