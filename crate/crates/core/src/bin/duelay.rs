fn main() {
    std::process::exit(duelay::cli::cli_main(std::env::args_os()));
}
