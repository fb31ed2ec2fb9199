fn main() {
    std::process::exit(ground_slam::cli::run(std::env::args_os()));
}
