#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chaingen {

enum class Errc {
    // protocol
    invalid_kind,
    missing_ref_id,
    malformed_json,
    unknown_kind,
    schema_violation,
    duplicate_id,
    session_mismatch,
    dangling_ref,
    wrong_kind,
    unknown_tool,
    unsupported_operation,
    // temporal
    invalid_constraints,
    invalid_task,
    invalid_entry,
    // spatial
    invalid_coordinate,
    empty_dataset,
    unreachable_destination,
    unknown_mode,
    invalid_horizon,
    invalid_weights,
    invalid_category,
    unknown_node,
    // environment
    unknown_env_mode,
    missing_data,
    past_target_time,
    empty_input,
    // memory
    dimension_mismatch,
    invalid_emotion,
    // agent
    reasoner_failure,
    unrepairable_chain,
    no_feasible_option,
    endpoint_unreachable,
    budget_exceeded,
    unparseable_response,
    timeout,
    // evaluation
    empty_chain,
    support_mismatch,
    non_normalized,
    empty_sample,
    out_of_range,
    empty_sequence,
    too_few_sequences,
    invalid_k,
    single_cluster,
    empty_range,
    // pipeline / io
    io_failure,
    parse_error,
    all_samples_failed,
    invalid_config,
    invalid_profile,
};

/// Wire name of an error code (snake_case, used in protocol status blocks).
std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, std::optional<std::size_t> offset = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          detail_(message),
          offset_(offset) {}

    Errc code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }
    /// Byte offset for parse failures.
    std::optional<std::size_t> offset() const noexcept { return offset_; }

private:
    Errc code_;
    std::string detail_;
    std::optional<std::size_t> offset_;
};

}  // namespace chaingen
