#pragma once

#include <string>
#include <vector>

#include "subcite/model.hpp"
#include "subcite/segment.hpp"

namespace subcite::segment {

struct CandidateOptions {
  SegmentOptions segmentation;
  std::string annotator = "subspan-generator";
  Timestamp created_at{};
};

/// Rule-based sub-sentence citation proposals for an instance.
///
/// For every sentence sharing a token with the answer, the shortest run of
/// clauses covering the shared answer tokens becomes a candidate (Type1 when
/// the run is the whole sentence, Type2 otherwise). When a preceding clause
/// names a capitalised entity that the run itself does not mention, a second
/// Type3 candidate pairs that subject clause with the run.
///
/// Returns an empty list when no sentence shares a token with the answer.
std::vector<CitationAnnotation> candidate_subspans(const QAInstance& instance,
                                                   const CandidateOptions& options = {});

}  // namespace subcite::segment
