fn main() {
    std::process::exit(flexsat::cli::run(std::env::args_os()));
}
