#include "chaingen/error.hpp"

namespace chaingen {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_kind: return "invalid_kind";
        case Errc::missing_ref_id: return "missing_ref_id";
        case Errc::malformed_json: return "malformed_json";
        case Errc::unknown_kind: return "unknown_kind";
        case Errc::schema_violation: return "schema_violation";
        case Errc::duplicate_id: return "duplicate_id";
        case Errc::session_mismatch: return "session_mismatch";
        case Errc::dangling_ref: return "dangling_ref";
        case Errc::wrong_kind: return "wrong_kind";
        case Errc::unknown_tool: return "unknown_tool";
        case Errc::unsupported_operation: return "unsupported_operation";
        case Errc::invalid_constraints: return "invalid_constraints";
        case Errc::invalid_task: return "invalid_task";
        case Errc::invalid_entry: return "invalid_entry";
        case Errc::invalid_coordinate: return "invalid_coordinate";
        case Errc::empty_dataset: return "empty_dataset";
        case Errc::unreachable_destination: return "unreachable_destination";
        case Errc::unknown_mode: return "unknown_mode";
        case Errc::invalid_horizon: return "invalid_horizon";
        case Errc::invalid_weights: return "invalid_weights";
        case Errc::invalid_category: return "invalid_category";
        case Errc::unknown_node: return "unknown_node";
        case Errc::unknown_env_mode: return "unknown_env_mode";
        case Errc::missing_data: return "missing_data";
        case Errc::past_target_time: return "past_target_time";
        case Errc::empty_input: return "empty_input";
        case Errc::dimension_mismatch: return "dimension_mismatch";
        case Errc::invalid_emotion: return "invalid_emotion";
        case Errc::reasoner_failure: return "reasoner_failure";
        case Errc::unrepairable_chain: return "unrepairable_chain";
        case Errc::no_feasible_option: return "no_feasible_option";
        case Errc::endpoint_unreachable: return "endpoint_unreachable";
        case Errc::budget_exceeded: return "budget_exceeded";
        case Errc::unparseable_response: return "unparseable_response";
        case Errc::timeout: return "timeout";
        case Errc::empty_chain: return "empty_chain";
        case Errc::support_mismatch: return "support_mismatch";
        case Errc::non_normalized: return "non_normalized";
        case Errc::empty_sample: return "empty_sample";
        case Errc::out_of_range: return "out_of_range";
        case Errc::empty_sequence: return "empty_sequence";
        case Errc::too_few_sequences: return "too_few_sequences";
        case Errc::invalid_k: return "invalid_k";
        case Errc::single_cluster: return "single_cluster";
        case Errc::empty_range: return "empty_range";
        case Errc::io_failure: return "io_failure";
        case Errc::parse_error: return "parse_error";
        case Errc::all_samples_failed: return "all_samples_failed";
        case Errc::invalid_config: return "invalid_config";
        case Errc::invalid_profile: return "invalid_profile";
    }
    return "unknown";
}

}  // namespace chaingen
