// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace hif8 {

enum class ErrorKind {
    NotRepresentable,
    DimensionMismatch,
    EmptyModel,
    ReportMismatch,
    BadMagic,
    BadVersion,
    BadHeader,
    TruncatedPayload,
    TrailingData,
    DimOverflow,
    SchemaError,
    InvalidArgument,
    Io,
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::NotRepresentable: return "NotRepresentable";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyModel: return "EmptyModel";
    case ErrorKind::ReportMismatch: return "ReportMismatch";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::BadVersion: return "BadVersion";
    case ErrorKind::BadHeader: return "BadHeader";
    case ErrorKind::TruncatedPayload: return "TruncatedPayload";
    case ErrorKind::TrailingData: return "TrailingData";
    case ErrorKind::DimOverflow: return "DimOverflow";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

/// All library failures are reported through this exception; kind() is stable
/// and meant for programmatic dispatch, what() carries the context.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind)
    {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace hif8
