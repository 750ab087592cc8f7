// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace muonrec {

enum class ErrorKind {
    Shape,
    NonFinite,
    Convergence,
    InvalidArgument,
    Config,
    Data,
    Io,
};

const char* to_string(ErrorKind kind);

// Every failure surfaced by the library is an Error; `kind()` lets callers
// (the CLI, the sweep runner) report a structured category.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message) :
        std::runtime_error(message), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

}  // namespace muonrec
