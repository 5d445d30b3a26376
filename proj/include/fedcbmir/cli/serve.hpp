#pragma once

#include <iostream>
#include <thread>

#include "fedcbmir/cae/model_file.hpp"
#include "fedcbmir/cli/commands.hpp"
#include "fedcbmir/service/server.hpp"

namespace fedcbmir::cli {

// Binds first so /healthz answers 503 while the model and index load.
inline int cmd_serve(const RunConfig& c, std::ostream& out) {
  detail::require(c.model, "--model");
  detail::require(c.index, "--index");
  const auto hp = parse_host_port(c.listen);
  service::QueryService svc({c.data_root, c.manifest, c.static_dir});
  const int port = svc.bind(hp.host, hp.port);
  if (!c.port_file.empty()) write_text(c.port_file, std::to_string(port) + "\n");
  out << "serving on " << hp.host << ":" << port << "\n" << std::flush;

  std::exception_ptr failure;
  std::thread loader([&] {
    try {
      svc.load(load_model(c.model), load_index(c.index));
      std::cerr << "model and index loaded\n";
    } catch (...) {
      failure = std::current_exception();
      svc.stop();
    }
  });
  svc.serve();
  loader.join();
  if (failure) std::rethrow_exception(failure);
  return kOk;
}

}  // namespace fedcbmir::cli
