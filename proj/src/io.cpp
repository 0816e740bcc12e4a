#include "hcov/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hcov/error.hpp"

namespace hcov {

std::string format_number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

namespace {

std::vector<std::string_view> tokens(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
            ++i;
        const auto start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r')
            ++i;
        if (i > start)
            out.push_back(line.substr(start, i - start));
    }
    return out;
}

[[noreturn]] void fail(const std::string& what, std::size_t line)
{
    throw Error(what + " (line " + std::to_string(line) + ")");
}

double to_double(std::string_view tok, std::size_t line)
{
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        fail("non-numeric token '" + std::string(tok) + "'", line);
    return v;
}

} // namespace

Dataset parse_input(std::istream& in, std::size_t dim)
{
    if (dim != 2 && dim != 3)
        throw Error("input: dimension must be 2 or 3");

    std::string line;
    std::size_t lineno = 0;
    long long count = -1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = tokens(line);
        if (t.empty())
            continue;
        if (t.size() != 1)
            fail("expected the number of records on the first line", lineno);
        const auto res = std::from_chars(t[0].data(), t[0].data() + t[0].size(), count);
        if (res.ec != std::errc() || res.ptr != t[0].data() + t[0].size())
            fail("non-numeric token '" + std::string(t[0]) + "'", lineno);
        if (count <= 0)
            fail("record count must be positive, got " + std::to_string(count), lineno);
        break;
    }
    if (count < 0)
        throw Error("input: empty file");

    const auto n = static_cast<std::size_t>(count);
    std::vector<double> coords;
    coords.reserve(n * dim);
    std::vector<double> values;
    values.reserve(n);
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = tokens(line);
        if (t.empty())
            continue;
        if (values.size() == n)
            fail("more than " + std::to_string(n) + " records", lineno);
        if (t.size() != dim + 1)
            fail("expected " + std::to_string(dim + 1) + " fields, found " + std::to_string(t.size()), lineno);
        for (std::size_t k = 0; k < dim; ++k)
            coords.push_back(to_double(t[k], lineno));
        values.push_back(to_double(t[dim], lineno));
    }
    if (values.size() != n)
        fail("expected " + std::to_string(n) + " records, found " + std::to_string(values.size()), lineno + 1);

    Dataset ds{PointSet(dim, std::move(coords)), Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(n))};
    ds.validate();
    return ds;
}

Dataset parse_input_file(const std::filesystem::path& path, std::size_t dim)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open " + path.string());
    return parse_input(in, dim);
}

void write_dataset(std::ostream& out, const Dataset& ds)
{
    out << ds.size() << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double c : ds.points.point(i))
            out << format_number(c) << ' ';
        out << format_number(ds.z(static_cast<Eigen::Index>(i))) << '\n';
    }
}

void write_dataset_file(const std::filesystem::path& path, const Dataset& ds)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path.string());
    write_dataset(out, ds);
}

void write_iteration_log(std::ostream& out, const std::vector<SimplexIteration>& trace)
{
    for (const auto& row : trace) {
        out << row.index;
        for (double x : row.x)
            out << ' ' << format_number(x);
        out << "  L = " << format_number(row.value) << "  TOL= " << format_number(row.size) << '\n';
    }
}

void write_solution_line(std::ostream& out, const FitResult& fit)
{
    out << (fit.converged ? "converged" : "not converged") << ": nu = " << format_number(fit.params.nu)
        << " ell = " << format_number(fit.params.ell) << " sigma2 = " << format_number(fit.params.sigma2)
        << " L = " << format_number(fit.negloglik) << '\n';
}

std::vector<SimplexIteration> parse_iteration_log(std::istream& in)
{
    std::vector<SimplexIteration> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = tokens(line);
        if (t.empty() || t[0] == "converged:" || t[0] == "not")
            continue;
        if (t.size() != 9 || t[4] != "L" || t[5] != "=" || t[7] != "TOL=")
            fail("malformed iteration row", lineno);
        SimplexIteration row;
        const auto res = std::from_chars(t[0].data(), t[0].data() + t[0].size(), row.index);
        if (res.ec != std::errc())
            fail("non-numeric token '" + std::string(t[0]) + "'", lineno);
        row.x = {to_double(t[1], lineno), to_double(t[2], lineno), to_double(t[3], lineno)};
        row.value = to_double(t[6], lineno);
        row.size = to_double(t[8], lineno);
        out.push_back(std::move(row));
    }
    return out;
}

void write_replicate_csv(std::ostream& out, const std::vector<ReplicateRecord>& records)
{
    for (const auto& r : records) {
        if (!r.fit) {
            out << "# failed n=" << r.n << " replicate=" << r.replicate << ": " << r.error << '\n';
            continue;
        }
        const auto& p = r.fit->params;
        out << r.n << ' ' << format_number(p.ell) << ' ' << format_number(p.nu) << ' ' << format_number(p.sigma2)
            << '\n';
    }
}

void write_profile_csv(std::ostream& out, Parameter vary, const std::vector<ProfileRow>& rows)
{
    out << parameter_name(vary) << ",negloglik,logdet,quadform\n";
    for (const auto& r : rows) {
        out << format_number(r.value);
        if (r.result)
            out << ',' << format_number(r.result->negloglik()) << ',' << format_number(r.result->logdet) << ','
                << format_number(r.result->quadform) << '\n';
        else
            out << ",nan,nan,nan\n";
    }
}

} // namespace hcov
