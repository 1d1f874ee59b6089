// chiron-holder: the data holder's client.
//
// Jobs are bound to the attested session that created them, so every
// subcommand drives one fresh session up to its terminal action:
//   upload  attest, upload the CSV, print the row count
//   train   ... then start a job and wait for DONE
//   status  ... then start a job and print one status probe
//   query   ... then wait for DONE and query the same rows' class ids
//
// CSV rows are "f1,f2,...,fd,label" with an integer label in the last column.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "chiron/client.hpp"

namespace {

using namespace chiron;

bool load_csv(const std::string& path, trainer::Dataset& out, std::string& err) {
  std::ifstream in(path);
  if (!in) {
    err = "cannot read " + path;
    return false;
  }
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        cells.push_back(v);
      } catch (const std::exception&) {
        err = "line " + std::to_string(lineno) + ": bad number '" + cell + "'";
        return false;
      }
    }
    if (cells.size() < 2) {
      err = "line " + std::to_string(lineno) + ": need at least one feature and a label";
      return false;
    }
    const size_t dim = cells.size() - 1;
    if (out.input_dim == 0) out.input_dim = dim;
    if (dim != out.input_dim) {
      err = "line " + std::to_string(lineno) + ": expected " + std::to_string(out.input_dim) +
            " features, got " + std::to_string(dim);
      return false;
    }
    const double label = cells.back();
    if (label < 0 || label != static_cast<uint32_t>(label)) {
      err = "line " + std::to_string(lineno) + ": label must be a non-negative integer";
      return false;
    }
    out.features.insert(out.features.end(), cells.begin(), cells.end() - 1);
    out.labels.push_back(static_cast<uint32_t>(label));
    out.n_rows += 1;
  }
  if (out.n_rows == 0) {
    err = "no data rows in " + path;
    return false;
  }
  return true;
}

int fail(const client::Failure& f) {
  std::cerr << "chiron-holder: " << f.message << "\n";
  return f.exit_code;
}

// Polls session status until the job leaves RUNNING/SYNCING/PENDING.
Result<client::HolderStatus, client::Failure> wait_done(client::AttestedClient& c,
                                                        unsigned wait_sec) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(wait_sec);
  while (true) {
    auto st = client::holder_status(c);
    if (!st.ok()) return st.error();
    const auto s = st.value().state;
    if (s == sandbox::JobState::DONE || s == sandbox::JobState::FAILED) return st.value();
    if (std::chrono::steady_clock::now() > deadline) {
      return client::Failure{client::kExitProtocol, "timed out waiting for training"};
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"chiron-holder: upload data, train, and query"};
  std::string server, measurement_hex, root_pk_hex, data_path;
  std::string action;
  uint32_t shards = 1;
  unsigned wait_sec = 120;
  cli.add_option("--server", server, "server address:port")->required();
  cli.add_option("--expected-measurement", measurement_hex, "expected enclave measurement (hex)")
      ->required();
  cli.add_option("--root-pk", root_pk_hex, "platform root public key (hex)")->required();
  cli.add_option("--data", data_path, "CSV data file")->required();
  cli.add_option("--shards", shards, "trainer enclaves for the job (default 1)");
  cli.add_option("--wait-sec", wait_sec, "seconds to wait for training (default 120)");
  cli.add_option("action", action, "one of: upload train status query")
      ->required()
      ->check(CLI::IsMember({"upload", "train", "status", "query"}));
  CLI11_PARSE(cli, argc, argv);

  trainer::Dataset data;
  std::string err;
  if (!load_csv(data_path, data, err)) {
    std::cerr << "chiron-holder: " << err << "\n";
    return client::kExitProtocol;
  }

  auto measurement = enclave::Measurement::from_hex(measurement_hex);
  auto root_pk_raw = hex_decode(root_pk_hex);
  if (!measurement || !root_pk_raw || root_pk_raw->size() != 32) {
    std::cerr << "chiron-holder: trust anchors must be 64 hex chars\n";
    return client::kExitProtocol;
  }
  std::array<uint8_t, 32> root_pk{};
  std::copy(root_pk_raw->begin(), root_pk_raw->end(), root_pk.begin());

  auto ep = net::parse_endpoint(server);
  if (!ep) {
    std::cerr << "chiron-holder: bad --server address: " << server << "\n";
    return client::kExitProtocol;
  }
  net::TcpStream stream;
  try {
    stream = net::connect_tcp(ep->host, ep->port);
  } catch (const Error& e) {
    std::cerr << "chiron-holder: cannot connect to " << server << ": " << e.what() << "\n";
    return client::kExitProtocol;
  }

  auto attested =
      client::attest(std::move(stream), app::SessionRole::HOLDER, *measurement, root_pk);
  if (!attested.ok()) return fail(attested.error());
  auto& c = attested.value();

  auto rows = client::upload_data(c, data);
  if (!rows.ok()) return fail(rows.error());
  std::cout << "uploaded rows=" << rows.value() << "\n";
  if (action == "upload") return client::kExitOk;

  auto job = client::start_train(c, shards);
  if (!job.ok()) return fail(job.error());
  std::cout << "job " << job.value() << " started (shards=" << shards << ")\n";

  if (action == "status") {
    auto st = client::holder_status(c);
    if (!st.ok()) return fail(st.error());
    std::cout << "status state=" << sandbox::job_state_name(st.value().state)
              << " epoch=" << st.value().epoch << " job=" << st.value().job_id << "\n";
    return client::kExitOk;
  }

  auto done = wait_done(c, wait_sec);
  if (!done.ok()) return fail(done.error());
  std::cout << "finished state=" << sandbox::job_state_name(done.value().state)
            << " epoch=" << done.value().epoch << "\n";
  if (done.value().state != sandbox::JobState::DONE) {
    std::cerr << "chiron-holder: training failed\n";
    return client::kExitProtocol;
  }
  if (action == "train") return client::kExitOk;

  auto ids = client::query(c, job.value(), data.features, static_cast<uint32_t>(data.n_rows),
                           static_cast<uint32_t>(data.input_dim));
  if (!ids.ok()) return fail(ids.error());
  std::cout << "query ids:";
  for (uint32_t id : ids.value()) std::cout << ' ' << id;
  std::cout << "\n";
  return client::kExitOk;
}
