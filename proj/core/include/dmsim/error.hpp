#pragma once

#include <stdexcept>
#include <string>

namespace dmsim {

// Bad input: configuration, trace, region, CFG or task-set files, and
// geometry that violates a documented constraint. CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The model hit a state it cannot continue from (page fault on a
// pre-allocated trace, out of physical pages, divergent RTA). CLI exit code 3.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PageFault : public ModelError {
public:
    using ModelError::ModelError;
};

class OutOfMemory : public ModelError {
public:
    using ModelError::ModelError;
};

} // namespace dmsim
