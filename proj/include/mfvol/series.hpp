#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mfvol {

/// Log-returns with optional date labels (labels are never interpreted).
struct ReturnSeries {
    std::vector<double> values;
    std::vector<std::string> labels;
};

enum class IngestMode { prices, returns };

struct ColumnSpec {
    /// Value column by header name; when unset a conventional name is looked
    /// up (x/return/returns or close/price/adj_close), falling back to the last column.
    std::optional<std::string> value;
    /// Label column; defaults to a column called "date" when there is one.
    std::optional<std::string> date;
};

struct IngestResult {
    ReturnSeries series;
    /// Rows dropped because the value was empty, NA, NaN or null.
    std::size_t skipped_rows = 0;
};

/// Parses a headed CSV.  Lines starting with '#' and blank lines are ignored.
/// In price mode x_t = log P_t - log P_{t-1}, so one value is lost.
IngestResult ingest_prices(std::istream& in, const ColumnSpec& columns, IngestMode mode);
IngestResult ingest_prices(const std::string& path, const ColumnSpec& columns, IngestMode mode);

} // namespace mfvol
