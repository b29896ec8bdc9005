#pragma once

#include "kqsd/model.hpp"

#include <map>
#include <string>
#include <vector>

namespace kqsd {

struct CatalogParam {
    std::string name;
    double default_value = 0.0;
    std::string describe;
};

struct CatalogEntry {
    std::string name;
    std::string describe;
    std::vector<CatalogParam> params;
};

// Deterministically ordered list of built-in coefficient models.
const std::vector<CatalogEntry>& catalog();

// Instantiates a catalog model; unknown parameter names are rejected with a
// list of every offender.
CoefficientModel make_catalog_model(const std::string& name,
                                    const std::map<std::string, double>& params);

}  // namespace kqsd
