fn main() {
    if let Err(err) = dsakt::cli::run() {
        eprintln!("error: {err}");
        std::process::exit(dsakt::cli::exit_code(&err));
    }
}
