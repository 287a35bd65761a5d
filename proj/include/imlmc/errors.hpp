#pragma once

#include <stdexcept>
#include <string>

namespace imlmc {

/// A replication blew up (nonfinite state, near-singular flow matrix, ...).
/// Estimators catch this per replication and count aborts instead of
/// silently dropping work.
class simulation_error : public std::runtime_error {
public:
    explicit simulation_error(const std::string& what) : std::runtime_error(what) {}
};

class singular_matrix_error : public simulation_error {
public:
    explicit singular_matrix_error(const std::string& what) : simulation_error(what) {}
};

}  // namespace imlmc
