#pragma once

#include <stdexcept>
#include <string>

namespace chartnet {

enum class ErrorClass {
    Parse,
    Validation,
    Ordering,
    EmptySlice,
    InsufficientData,
    LookaheadMissing,
    Alignment,
    EmptyClass,
    Shape,
    State,
    Format,
    Domain,
    DegenerateTrade,
    Io,
    Config,
};

constexpr const char* to_string(ErrorClass cls) {
    switch (cls) {
        case ErrorClass::Parse: return "parse_error";
        case ErrorClass::Validation: return "validation_error";
        case ErrorClass::Ordering: return "ordering_error";
        case ErrorClass::EmptySlice: return "empty_slice_error";
        case ErrorClass::InsufficientData: return "insufficient_data_error";
        case ErrorClass::LookaheadMissing: return "lookahead_missing_error";
        case ErrorClass::Alignment: return "alignment_error";
        case ErrorClass::EmptyClass: return "empty_class_error";
        case ErrorClass::Shape: return "shape_error";
        case ErrorClass::State: return "state_error";
        case ErrorClass::Format: return "format_error";
        case ErrorClass::Domain: return "domain_error";
        case ErrorClass::DegenerateTrade: return "degenerate_trade_error";
        case ErrorClass::Io: return "io_error";
        case ErrorClass::Config: return "config_error";
    }
    return "error";
}

/// Library-wide exception carrying a machine-parsable error class.
class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& message)
        : std::runtime_error(std::string(to_string(cls)) + ": " + message), cls_(cls) {}

    ErrorClass error_class() const { return cls_; }

private:
    ErrorClass cls_;
};

[[noreturn]] inline void raise(ErrorClass cls, const std::string& message) {
    throw Error(cls, message);
}

}  // namespace chartnet
