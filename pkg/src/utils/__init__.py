# Utils package: logging and configuration
