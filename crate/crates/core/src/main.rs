fn main() {
    std::process::exit(mgnet::cli::run(std::env::args_os()));
}
