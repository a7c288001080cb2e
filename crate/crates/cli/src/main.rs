fn main() {
    std::process::exit(ctrlmix_cli::run(std::env::args_os()));
}
