fn main() {
    std::process::exit(a2w::cli::cli_main(std::env::args_os()));
}
