#pragma once

#include <string>
#include <vector>

#include "ifm/protocol.hpp"

namespace ifm::svg {

// Renders enrichment/depletion curves: mean lines with +-1 sigma companions,
// plus the no-separation diagonal. CSV remains the machine contract; this is
// a convenience view.
std::string render_enrichment_curves(const std::vector<protocol::EnrichmentPoint>& curve,
                                     const std::string& title);

void write_enrichment_curves(const std::string& path,
                             const std::vector<protocol::EnrichmentPoint>& curve,
                             const std::string& title);

}  // namespace ifm::svg
