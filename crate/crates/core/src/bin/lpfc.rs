fn main() {
    std::process::exit(lpfc::cli::run(std::env::args_os()));
}
