#include "mfvol/series.hpp"

#include <boost/tokenizer.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mfvol {

namespace {

using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;

std::string trim(std::string s)
{
    auto blank = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), blank));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), blank).base(), s.end());
    return s;
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split_row(const std::string& line, std::size_t line_no)
{
    std::vector<std::string> out;
    try {
        Tokenizer tok(line, boost::escaped_list_separator<char>('\\', ',', '"'));
        for (const auto& field : tok)
            out.push_back(trim(field));
    } catch (const boost::escaped_list_error& e) {
        throw std::runtime_error("CSV line " + std::to_string(line_no) + ": " + e.what());
    }
    return out;
}

bool is_missing(const std::string& field)
{
    const std::string f = lower(field);
    return f.empty() || f == "na" || f == "nan" || f == "null" || f == "n/a";
}

double parse_number(const std::string& field, std::size_t line_no)
{
    double v = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    if (first != last && *first == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw std::runtime_error("CSV line " + std::to_string(line_no) + ": cannot parse '" +
                                 field + "' as a number");
    return v;
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header,
                                       const std::string& name)
{
    const std::string want = lower(name);
    for (std::size_t i = 0; i < header.size(); ++i)
        if (lower(header[i]) == want)
            return i;
    return std::nullopt;
}

} // namespace

IngestResult ingest_prices(std::istream& in, const ColumnSpec& columns, IngestMode mode)
{
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (trim(line).empty() || line.front() == '#')
            continue;
        header = split_row(line, line_no);
        break;
    }
    if (header.empty())
        throw std::runtime_error("CSV input has no header row");

    std::size_t value_col = header.size() - 1;
    if (columns.value) {
        const auto c = find_column(header, *columns.value);
        if (!c)
            throw std::runtime_error("CSV input has no column '" + *columns.value + "'");
        value_col = *c;
    } else {
        const std::vector<std::string> names = mode == IngestMode::returns
                                                   ? std::vector<std::string>{"x", "return", "returns"}
                                                   : std::vector<std::string>{"close", "price", "adj_close"};
        for (const auto& n : names)
            if (const auto c = find_column(header, n)) {
                value_col = *c;
                break;
            }
    }
    std::optional<std::size_t> date_col;
    if (columns.date) {
        date_col = find_column(header, *columns.date);
        if (!date_col)
            throw std::runtime_error("CSV input has no column '" + *columns.date + "'");
    } else {
        date_col = find_column(header, "date");
    }

    IngestResult out;
    std::vector<double> raw;
    std::vector<std::string> labels;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (trim(line).empty() || line.front() == '#')
            continue;
        const auto row = split_row(line, line_no);
        if (row.size() != header.size())
            throw std::runtime_error("CSV line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " fields, found " +
                                     std::to_string(row.size()));
        if (is_missing(row[value_col])) {
            ++out.skipped_rows;
            continue;
        }
        const double v = parse_number(row[value_col], line_no);
        if (mode == IngestMode::prices && !(v > 0.0))
            throw std::runtime_error("CSV line " + std::to_string(line_no) +
                                     ": prices must be positive");
        raw.push_back(v);
        if (date_col)
            labels.push_back(row[*date_col]);
    }

    for (std::size_t i = 1; i < labels.size(); ++i)
        if (!(labels[i - 1] < labels[i]))
            throw std::runtime_error("date labels are not strictly increasing at '" + labels[i] +
                                     "'");

    ReturnSeries& s = out.series;
    if (mode == IngestMode::returns) {
        s.values = std::move(raw);
        s.labels = std::move(labels);
    } else {
        if (raw.size() < 2)
            throw std::runtime_error("price mode needs at least two prices");
        s.values.resize(raw.size() - 1);
        for (std::size_t i = 1; i < raw.size(); ++i)
            s.values[i - 1] = std::log(raw[i]) - std::log(raw[i - 1]);
        if (!labels.empty())
            s.labels.assign(labels.begin() + 1, labels.end());
    }
    if (s.values.empty())
        throw std::runtime_error("CSV input contains no usable rows");
    return out;
}

IngestResult ingest_prices(const std::string& path, const ColumnSpec& columns, IngestMode mode)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open input file '" + path + "'");
    return ingest_prices(in, columns, mode);
}

} // namespace mfvol
