#pragma once

#include "fbp/domain.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace fbp {

struct CheckRecord {
    std::string name;
    double expected = 0.0;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct CriterionRecord {
    int id = 0;
    std::string title;
    std::string paper_ref;  // claim being checked, in words
    double expected = 0.0;  // headline check (first entry of `checks`)
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    bool informative = false;  // nothing to check; recorded outcome only
    std::string note;
    std::vector<CheckRecord> checks;
};

struct VerifyConfig {
    Resolution disk{512, 64};
    int square = 128;
    int ball = 2048;
    int modes = 8;
    std::uint64_t seed = 20240607;
    double alpha_tol = 1e-3;
    double dlambda_max = 0.25;
    int threads = 0;  // concurrent branch traces; 0 = hardware concurrency
    std::ostream* log = nullptr;
};

struct VerifyReport {
    std::vector<CriterionRecord> criteria;
    bool all_pass = false;
    double seconds = 0.0;
};

VerifyReport verify(const VerifyConfig& cfg);

std::string report_to_json(const VerifyReport& report, const VerifyConfig& cfg);

}  // namespace fbp
