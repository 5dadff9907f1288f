fn main() {
    std::process::exit(dcsc_cli::cli_main(std::env::args_os()));
}
