#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace aesaudit {

// Base for all domain errors. `code()` is the stable machine-readable
// identifier emitted in error JSON by the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

#define AESAUDIT_DEFINE_ERROR(Name, code_str)                    \
    class Name : public Error {                                  \
    public:                                                      \
        explicit Name(const std::string& what)                   \
            : Error(code_str, what) {}                           \
    }

AESAUDIT_DEFINE_ERROR(InvalidLabelForTask, "invalid_label_for_task");
AESAUDIT_DEFINE_ERROR(MissingField, "missing_field");
AESAUDIT_DEFINE_ERROR(ScoreOutOfRange, "score_out_of_range");
AESAUDIT_DEFINE_ERROR(NoAnnotatorsInGroup, "no_annotators_in_group");
AESAUDIT_DEFINE_ERROR(EmptyIdentity, "empty_identity");
AESAUDIT_DEFINE_ERROR(AllCellsEmpty, "all_cells_empty");
AESAUDIT_DEFINE_ERROR(DimensionMismatch, "dimension_mismatch");
AESAUDIT_DEFINE_ERROR(NoOverlap, "no_overlap");
AESAUDIT_DEFINE_ERROR(MissingIdentity, "missing_identity");
AESAUDIT_DEFINE_ERROR(MissingMode, "missing_mode");
AESAUDIT_DEFINE_ERROR(IncompleteTable, "incomplete_table");
AESAUDIT_DEFINE_ERROR(InvalidDistribution, "invalid_distribution");
AESAUDIT_DEFINE_ERROR(FileNotFound, "file_not_found");
AESAUDIT_DEFINE_ERROR(UndecodableImage, "undecodable_image");
AESAUDIT_DEFINE_ERROR(EndpointUnreachable, "endpoint_unreachable");
AESAUDIT_DEFINE_ERROR(AuthFailure, "auth_failure");
AESAUDIT_DEFINE_ERROR(RateLimited, "rate_limited");
AESAUDIT_DEFINE_ERROR(DataError, "data_error");

#undef AESAUDIT_DEFINE_ERROR

}  // namespace aesaudit
