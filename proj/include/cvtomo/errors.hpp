#pragma once

#include <stdexcept>
#include <string>

namespace cvtomo {

// Conditioning / decomposition / domain failures.  CLI maps these to exit 3.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// A tomography run declared failure (uncertainty check, post-selection floor,
// sample starvation).  CLI maps these to exit 4.
class pipeline_failure : public std::runtime_error {
public:
    explicit pipeline_failure(const std::string& what) : std::runtime_error(what) {}
};

// File / serialization problems.  CLI maps these to exit 5.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cvtomo
